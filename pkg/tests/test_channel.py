import math

import numpy as np
import pytest

from src.zfuplink.channel import (
    complex_gaussian,
    draw_channels,
    error_variances,
    estimation_error_traces,
    mmse_estimate,
    normalized_error_db,
    pilot_observation,
)
from src.zfuplink.receiver import build_zf
from src.zfuplink.system_model import fixed_cross_gain_profile
from tests.conftest import make_config


def _estimate(cfg, profile, seed):
    rng = np.random.default_rng(seed)
    realization = draw_channels(cfg, profile, 0, rng)
    return realization, mmse_estimate(cfg, profile, realization, pilot_observation(cfg, realization, rng))


def test_complex_gaussian_unit_variance():
    samples = complex_gaussian(np.random.default_rng(0), (200_000,))
    assert np.mean(np.abs(samples) ** 2) == pytest.approx(1.0, rel=0.01)
    assert abs(np.mean(samples)) < 0.01


def test_channel_scaling(cfg, profile):
    realization = draw_channels(cfg, profile, 0, np.random.default_rng(1))
    assert realization.G.shape == (cfg.L, cfg.M, cfg.K)
    gains = np.sqrt(profile.beta[:, 0, :])
    np.testing.assert_allclose(realization.G, realization.H * gains[:, None, :])
    np.testing.assert_array_equal(realization.desired, realization.G[0])


def test_estimates_are_parallel_across_cells(cfg, profile):
    _, estimate = _estimate(cfg, profile, 2)
    # contaminated estimates differ only by the gain ratio of each column
    ratio = profile.beta[1, 0, :] / profile.beta[0, 0, :]
    np.testing.assert_allclose(estimate.G_hat_all[1], estimate.G_hat_all[0] * ratio[None, :])
    np.testing.assert_allclose(estimate.xi, estimate.xi_all[0])


def test_estimate_shape_checked(cfg, profile):
    realization = draw_channels(cfg, profile, 0, np.random.default_rng(3))
    with pytest.raises(ValueError, match="pilot observation"):
        mmse_estimate(cfg, profile, realization, np.zeros((cfg.M, cfg.K + 1)))


def test_contamination_trace_anchor(cfg, profile):
    alpha = estimation_error_traces(cfg, profile, 0)
    assert alpha[0] == pytest.approx(300.0 / 131.0, rel=1e-12)
    np.testing.assert_allclose(alpha[1:], 62.5 / 131.0)


def test_single_cell_trace_is_exactly_zero():
    cfg = make_config(L=1)
    profile = fixed_cross_gain_profile(cfg, 0.05)
    assert estimation_error_traces(cfg, profile, 0)[0] == 0.0


def test_full_trace_identity(cfg, profile):
    full = estimation_error_traces(cfg, profile, 0, include_noise=True)
    np.testing.assert_allclose(full, error_variances(cfg, profile, 0).sum(axis=1), rtol=1e-12)


def test_empirical_error_variance(cfg, profile):
    cfg = cfg.with_updates(M=200)
    draws = 500
    power = np.zeros((cfg.L, cfg.K))
    for seed in range(draws):
        _, estimate = _estimate(cfg, profile, seed)
        power += np.mean(np.abs(estimate.xi_all) ** 2, axis=1)
    np.testing.assert_allclose(power / draws, error_variances(cfg, profile, 0), rtol=0.05)


def test_high_snr_single_cell_estimate_is_accurate():
    cfg = make_config(L=1, snr_db=60.0)
    profile = fixed_cross_gain_profile(cfg, 0.0)
    _, estimate = _estimate(cfg, profile, 4)
    assert estimate.norm_err_db < -60.0


def test_normalized_error_db():
    G = np.ones((4, 2), dtype=complex)
    assert normalized_error_db(G, G) == -math.inf
    assert normalized_error_db(G, 0.9 * G) == pytest.approx(-20.0)
    with pytest.raises(ValueError, match="all-zero"):
        normalized_error_db(np.zeros((4, 2)), G)
    with pytest.raises(ValueError, match="shape"):
        normalized_error_db(G, G[:, :1])


def test_pilot_observation_single_cell_high_snr():
    cfg = make_config(L=1, snr_db=60.0)
    profile = fixed_cross_gain_profile(cfg, 0.0)
    rng = np.random.default_rng(21)
    realization = draw_channels(cfg, profile, 0, rng)
    y_tilde = pilot_observation(cfg, realization, rng)
    np.testing.assert_allclose(y_tilde / math.sqrt(cfg.pilot_power), realization.G[0], atol=0.01)


def test_pilot_observation_sums_every_cell():
    cfg = make_config(L=2, snr_db=60.0)
    profile = fixed_cross_gain_profile(cfg, 1.0)
    rng = np.random.default_rng(22)
    realization = draw_channels(cfg, profile, 0, rng)
    y_tilde = pilot_observation(cfg, realization, rng)
    np.testing.assert_allclose(
        y_tilde / math.sqrt(cfg.pilot_power), realization.G[0] + realization.G[1], atol=0.01
    )


def test_pilot_noise_has_unit_variance(cfg, profile):
    cfg = cfg.with_updates(M=200)
    power = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        realization = draw_channels(cfg, profile, 0, rng)
        y_tilde = pilot_observation(cfg, realization, rng)
        noise = y_tilde - math.sqrt(cfg.pilot_power) * realization.G.sum(axis=0)
        power.append(np.mean(np.abs(noise) ** 2))
    assert np.mean(power) == pytest.approx(1.0, rel=0.03)


def test_error_uncorrelated_with_estimate(cfg, profile):
    cross = []
    signal = []
    for seed in range(200):
        realization, estimate = _estimate(cfg, profile, seed)
        cross.append(np.mean(np.conj(estimate.G_hat) * estimate.xi))
        signal.append(np.mean(np.conj(estimate.G_hat) * realization.desired))
    assert abs(np.mean(cross)) < 0.01
    # the estimate itself carries beta^2 / beta_hat of the channel power
    assert np.real(np.mean(signal)) == pytest.approx(1.0 / 1.31, rel=0.05)


def _zf_draws(cfg, profile, draws):
    for seed in range(draws):
        rng = np.random.default_rng(seed)
        realization = draw_channels(cfg, profile, 0, rng)
        y_tilde = pilot_observation(cfg, realization, rng)
        estimate = mmse_estimate(cfg, profile, realization, y_tilde)
        yield estimate, build_zf(estimate.G_hat), rng


def test_filtered_error_power_uses_full_trace(cfg, profile):
    per_draw = []
    for estimate, receiver, _ in _zf_draws(cfg, profile, 4000):
        filtered = np.sum(np.abs(estimate.xi.conj().T @ receiver.A) ** 2, axis=0)
        per_draw.append(np.mean(filtered / receiver.gram_inv_diag))
    mean = np.mean(per_draw)
    se = np.std(per_draw, ddof=1) / math.sqrt(len(per_draw))
    full = estimation_error_traces(cfg, profile, 0, include_noise=True)[0]
    contamination_only = estimation_error_traces(cfg, profile, 0)[0]
    assert abs(mean - full) < 4.0 * se
    assert abs(mean - contamination_only) > 4.0 * se


def test_filtered_noise_power(cfg, profile):
    per_draw = []
    for _, receiver, rng in _zf_draws(cfg, profile, 2000):
        noise = complex_gaussian(rng, (cfg.M,))
        per_draw.append(np.mean(np.abs(receiver.A.conj().T @ noise) ** 2 / receiver.gram_inv_diag))
    se = np.std(per_draw, ddof=1) / math.sqrt(len(per_draw))
    assert abs(np.mean(per_draw) - 1.0) < 4.0 * se
