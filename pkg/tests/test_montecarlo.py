import math

import numpy as np
import pytest
from scipy import special

from src.zfuplink import montecarlo
from src.zfuplink.analytic import rate_quadrature, ser_exact, sinr_cdf
from src.zfuplink.montecarlo import (
    MAX_REDRAWS,
    TrialPlan,
    binomial_ci,
    ks_critical_value,
    ks_statistic,
    mean_ci,
    run_ser_trials,
    run_sinr_trials,
    trial_rng,
)
from src.zfuplink.receiver import RankDeficientChannelError
from src.zfuplink.system_model import fixed_cross_gain_profile
from tests.conftest import make_config


def make_plan(trials=200, seed=99, cross_gain=0.05, **kwargs):
    plan_keys = ("cell", "user", "symbols_per_trial", "gamma_th", "include_noise")
    plan_args = {k: kwargs.pop(k) for k in plan_keys if k in kwargs}
    cfg = make_config(**kwargs)
    profile = fixed_cross_gain_profile(cfg, cross_gain)
    return TrialPlan(cfg=cfg, profile=profile, master_seed=seed, num_trials=trials, **plan_args)


class TestTrialRng:
    def test_reproducible(self):
        a = trial_rng(5, 3).standard_normal(4)
        b = trial_rng(5, 3).standard_normal(4)
        np.testing.assert_array_equal(a, b)

    def test_streams_are_distinct(self):
        base = trial_rng(5, 3).standard_normal(4)
        assert not np.array_equal(base, trial_rng(5, 4).standard_normal(4))
        assert not np.array_equal(base, trial_rng(5, 3, attempt=1).standard_normal(4))
        assert not np.array_equal(base, trial_rng(6, 3).standard_normal(4))


class TestTrialPlan:
    @pytest.mark.parametrize(
        "kwargs, fragment",
        [
            (dict(trials=0), "num_trials"),
            (dict(seed=-1), "master_seed"),
            (dict(symbols_per_trial=0), "symbols_per_trial"),
            (dict(cell=7), "cell"),
            (dict(user=10), "user"),
            (dict(gamma_th=-1.0), "gamma_th"),
        ],
    )
    def test_rejects_invalid_plans(self, kwargs, fragment):
        with pytest.raises(ValueError, match=fragment):
            make_plan(**kwargs)

    def test_rejects_mismatched_profile(self):
        cfg = make_config()
        profile = fixed_cross_gain_profile(make_config(L=3), 0.05)
        with pytest.raises(ValueError, match="does not match"):
            TrialPlan(cfg=cfg, profile=profile, master_seed=1, num_trials=10)


class TestSinrTrials:
    def test_same_plan_same_statistics(self):
        plan = make_plan(trials=50, M=20)
        first, second = run_sinr_trials(plan), run_sinr_trials(plan)
        np.testing.assert_array_equal(first.empirical_cdf, second.empirical_cdf)
        assert first.mean_rate == second.mean_rate
        np.testing.assert_array_equal(first.mean_error_variance, second.mean_error_variance)

    def test_parallel_matches_serial(self):
        plan = make_plan(trials=40, M=20)
        serial = run_sinr_trials(plan, workers=1)
        parallel = run_sinr_trials(plan, workers=2)
        np.testing.assert_array_equal(serial.empirical_cdf, parallel.empirical_cdf)
        np.testing.assert_array_equal(serial.per_user_mean_rate, parallel.per_user_mean_rate)
        assert serial.mean_sum_rate == parallel.mean_sum_rate

    def test_workers_must_be_positive(self):
        with pytest.raises(ValueError, match="workers"):
            run_sinr_trials(make_plan(trials=5, M=20), workers=0)

    def test_statistics_shapes_and_ranges(self):
        plan = make_plan(trials=100, M=20, gamma_th=3.0)
        stats = run_sinr_trials(plan)
        assert stats.trial_count == 100
        assert np.all(np.diff(stats.empirical_cdf) >= 0)
        assert stats.per_user_mean_rate.shape == (10,)
        assert stats.mean_error_variance.shape == (10,)
        assert 0.0 <= stats.outage_rate <= 1.0
        assert math.isnan(stats.ser_estimate)
        assert stats.symbol_count == 0
        assert stats.redraw_count == 0

    def test_outage_equals_ecdf_at_threshold(self):
        threshold = 5.0
        stats = run_sinr_trials(make_plan(trials=300, M=50, gamma_th=threshold))
        assert stats.outage_rate == stats.ecdf(threshold)
        assert stats.outage_rate == np.mean(stats.empirical_cdf < threshold)

    def test_single_cell_high_snr_mean(self):
        plan = make_plan(trials=2000, L=1, M=20, snr_db=40.0)
        stats = run_sinr_trials(plan)
        power = plan.cfg.P_u
        assert abs(stats.mean_sinr / power - 11.0) <= 3.0 * stats.std_errors["sinr"] / power

    def test_error_variance_matches_model(self):
        plan = make_plan(trials=500, M=100)
        stats = run_sinr_trials(plan)
        expected = 1.0 - 1.0 / 1.31
        np.testing.assert_allclose(stats.mean_error_variance, expected, rtol=0.05)

    def test_standard_errors_shrink_with_trials(self):
        small = run_sinr_trials(make_plan(trials=1000, M=20, seed=1))
        large = run_sinr_trials(make_plan(trials=4000, M=20, seed=2))
        ratio = small.std_errors["rate"] / large.std_errors["rate"]
        assert ratio == pytest.approx(2.0, rel=0.2)


class TestRedraws:
    def test_rank_deficient_draw_is_redrawn(self, monkeypatch):
        real_build = montecarlo.build_zf
        calls = {"count": 0}

        def flaky(G_hat):
            calls["count"] += 1
            if calls["count"] == 1:
                raise RankDeficientChannelError("forced")
            return real_build(G_hat)

        monkeypatch.setattr(montecarlo, "build_zf", flaky)
        stats = run_sinr_trials(make_plan(trials=5, M=20))
        assert stats.redraw_count == 1
        assert stats.trial_count == 5

    def test_persistent_failure_propagates(self, monkeypatch):
        def broken(G_hat):
            raise RankDeficientChannelError("forced")

        monkeypatch.setattr(montecarlo, "build_zf", broken)
        with pytest.raises(RankDeficientChannelError, match=str(MAX_REDRAWS + 1)):
            run_sinr_trials(make_plan(trials=2, M=20))


class TestSerTrials:
    def test_perfect_conditions_give_no_errors(self):
        plan = make_plan(trials=50, L=1, K=4, tau_u=4, M=20, snr_db=60.0, symbols_per_trial=20)
        stats = run_ser_trials(plan)
        assert stats.symbol_count == 50 * 4 * 20
        assert stats.error_count == 0
        assert stats.ser_estimate == 0.0

    def test_higher_order_more_errors(self):
        rates = []
        for order in (4, 16, 64):
            plan = make_plan(trials=200, M=30, qam_order=order, cross_gain=0.1, symbols_per_trial=5)
            rates.append(run_ser_trials(plan).ser_estimate)
        assert rates[0] < rates[1] < rates[2]

    @pytest.mark.slow
    def test_matches_closed_form(self):
        plan = make_plan(trials=10_000, M=50, cross_gain=0.1, include_noise=True)
        stats = run_ser_trials(plan)
        params = plan.sinr_params()[0]
        low, high = binomial_ci(stats.error_count, stats.symbol_count, 0.99)
        assert low <= ser_exact(params, 4) <= high


@pytest.mark.slow
class TestDistributionAgreement:
    @pytest.fixture(scope="class")
    def law_run(self):
        plan = make_plan(trials=10_000, M=50, seed=2024)
        return plan, run_sinr_trials(plan)

    def test_ks_below_critical_value(self, law_run):
        plan, stats = law_run
        params = plan.sinr_params()[0]
        statistic = ks_statistic(stats.empirical_cdf, lambda s: sinr_cdf(params, s))
        assert statistic < ks_critical_value(stats.trial_count)

    def test_mean_rate_matches_quadrature(self, law_run):
        plan, stats = law_run
        reference = rate_quadrature(plan.sinr_params()[0])
        assert abs(stats.mean_rate - reference) <= 3.0 * stats.std_errors["rate"]


class TestKsStatistic:
    def test_inverse_transform_samples(self):
        rng = np.random.default_rng(0)
        samples = -np.log1p(-rng.uniform(size=5000))
        statistic = ks_statistic(samples, lambda x: -math.expm1(-x))
        assert statistic < ks_critical_value(5000)

    def test_constant_samples(self):
        statistic = ks_statistic(np.full(200, 0.3), lambda x: 0.5 * (1 + special.erf(x / math.sqrt(2))))
        assert statistic >= 0.5

    def test_needs_enough_samples(self):
        with pytest.raises(ValueError, match="at least"):
            ks_statistic(np.zeros(10), lambda x: x)

    def test_critical_value(self):
        assert ks_critical_value(10_000) == pytest.approx(0.0163, abs=1e-4)


def test_binomial_ci():
    low, high = binomial_ci(30, 1000, 0.99)
    assert low < 0.03 < high
    assert 0.0 <= low and high <= 1.0
    with pytest.raises(ValueError):
        binomial_ci(0, 0)


def test_mean_ci_is_symmetric():
    low, high = mean_ci(2.0, 0.1, 0.99)
    assert 2.0 - low == pytest.approx(high - 2.0)
    assert high - 2.0 == pytest.approx(0.2576, abs=1e-3)
