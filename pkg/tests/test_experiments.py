import json
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import trapezoid

from experiments.cli import analytic_table, build_parser, main, parse_grid, resolve_config
from experiments.config import ExperimentConfig, apply_overrides, load_config, parse_assignments
from experiments.figures import (
    Curve,
    FigureResult,
    point_seed,
    ratio_interval_db,
    run_figure,
    write_figure,
)
from experiments.validation import (
    CheckResult,
    ValidationSuite,
    all_required_passed,
    write_report,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


class TestConfig:
    def test_key_value_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# scenario\nL = 3\nM = 64   # antennas\nsnr_db = 5\nscenario = hex\nnormalize_hex = false\n"
        )
        config = load_config(path)
        assert config.L == 3
        assert config.M == 64
        assert config.snr_db == 5.0 and isinstance(config.snr_db, float)
        assert config.scenario == "hex"
        assert config.normalize_hex is False
        assert config.K == 10

    def test_yaml_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("cross_gain: 0.1\ntrials: 500\n")
        config = load_config(path)
        assert config.cross_gain == 0.1
        assert config.trials == 500

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("antennas = 4\n")
        with pytest.raises(ValueError, match="unknown configuration keys: antennas"):
            load_config(path)

    def test_malformed_line(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_assignments(["L = 7", "M 100"])

    def test_type_checks(self):
        with pytest.raises(ValueError, match="integer"):
            apply_overrides(ExperimentConfig(), {"M": "many"})
        with pytest.raises(ValueError, match="true or false"):
            apply_overrides(ExperimentConfig(), {"normalize_hex": 3})

    def test_numeric_strings(self):
        assert apply_overrides(ExperimentConfig(), {"trials": "1e3"}).trials == 1000
        assert apply_overrides(ExperimentConfig(), {"snr_db": "1e1"}).snr_db == 10.0
        with pytest.raises(ValueError, match="trials=.*must be an integer"):
            apply_overrides(ExperimentConfig(), {"trials": "2.5e2x"})
        with pytest.raises(ValueError, match="trials=2.5 must be an integer"):
            apply_overrides(ExperimentConfig(), {"trials": 2.5})

    def test_scientific_notation_on_command_line(self, capsys):
        args = build_parser().parse_args(["analytic", "cdf", "--set", "trials=1e3"])
        assert resolve_config(args).trials == 1000
        assert main(["analytic", "cdf", "--set", "trials=1.5e2.0"]) == 2
        assert "trials" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "changes, fragment",
        [
            (dict(M=5000), "desk-scale"),
            (dict(trials=200_000), "trials"),
            (dict(scenario="ring"), "ring"),
            (dict(M=5), "M=5 < K=10"),
            (dict(user=10), "user"),
        ],
    )
    def test_validation(self, changes, fragment):
        with pytest.raises(ValueError, match=fragment):
            ExperimentConfig(**changes).validate()

    def test_shipped_configs_load(self):
        assert load_config(CONFIGS / "default.cfg").validate().cross_gain == 0.05
        hex_config = load_config(CONFIGS / "hex.yaml").validate()
        assert hex_config.profile().beta.shape == (7, 7, 10)


class TestAnalyticCommand:
    def test_grid_parsing(self):
        np.testing.assert_allclose(parse_grid("0:10:3"), [0.0, 5.0, 10.0])
        np.testing.assert_allclose(parse_grid("1, 2.5,4"), [1.0, 2.5, 4.0])
        for bad in ("1:2", "a,b", "0:1:0", ""):
            with pytest.raises(ValueError, match="grid"):
                parse_grid(bad)

    def test_asymptote_rows(self):
        table = analytic_table(ExperimentConfig(), "asymptote", None)
        assert len(table) == 10
        np.testing.assert_allclose(table["sinr"], 200.0 / 3.0, atol=1e-9)

    def test_outage_beyond_ceiling(self):
        table = analytic_table(ExperimentConfig(), "outage", np.array([0.0, 18.3, 25.0]))
        assert table["outage"].iloc[1] == 1.0
        assert table["outage"].iloc[2] == 1.0
        assert 0.0 <= table["outage"].iloc[0] < 1.0

    def test_pdf_normalizes_on_default_grid(self):
        table = analytic_table(ExperimentConfig(), "pdf", None)
        assert trapezoid(table["pdf"], table["sinr"]) == pytest.approx(1.0, abs=1e-4)

    def test_ser_grid(self):
        table = analytic_table(ExperimentConfig(cross_gain=0.1), "ser", np.array([20.0, 60.0]))
        assert list(table["M"]) == [20, 60]
        assert np.all(table["ser_upper"] >= table["ser"])
        with pytest.raises(ValueError, match="integer"):
            analytic_table(ExperimentConfig(), "ser", np.array([20.5]))

    def test_cli_writes_csv(self, tmp_path):
        assert main(["analytic", "rate", "--grid", "0,10", "--out", str(tmp_path)]) == 0
        table = pd.read_csv(tmp_path / "analytic_rate.csv")
        assert list(table.columns) == ["snr_db", "rate"]
        assert table["rate"].iloc[1] > table["rate"].iloc[0]

    def test_cli_rejects_bad_override(self, tmp_path):
        assert main(["analytic", "cdf", "--set", "antennas=3", "--out", str(tmp_path)]) == 2

    def test_cli_montecarlo(self, tmp_path):
        code = main(
            ["montecarlo", "--trials", "30", "--set", "M=20", "--seed", "5", "--out", str(tmp_path)]
        )
        assert code == 0
        summary = pd.read_csv(tmp_path / "montecarlo_summary.csv")
        assert summary["trials"].iloc[0] == 30
        assert len(pd.read_csv(tmp_path / "montecarlo_ecdf.csv")) == 30


class TestFigures:
    def test_point_seeds_are_distinct(self):
        seeds = {point_seed(2024, 3, c, p) for c in range(4) for p in range(26)}
        assert len(seeds) == 104
        assert point_seed(2024, 1, 0, 0) == point_seed(2024, 1, 0, 0)

    def test_analytic_only_curve_leaves_columns_empty(self, tmp_path):
        curve = Curve("Minf", "M = inf", np.array([0.0, 1.0]), np.array([57.7, 57.7]))
        result = FigureResult("figX", "t", "x", "y", [curve])
        paths = write_figure(result, tmp_path)
        table = pd.read_csv(paths[0])
        assert list(table.columns) == ["x", "analytic_y", "mc_y", "mc_ci_low", "mc_ci_high"]
        assert table["mc_y"].isna().all()
        assert (tmp_path / "figX.svg").exists()

    def test_outage_figure_is_reproducible(self, tmp_path):
        config = ExperimentConfig(trials=60)
        first = run_figure("fig3", config, tmp_path / "a")
        second = run_figure("fig3", config, tmp_path / "b")
        csv_first = sorted(p for p in first if p.suffix == ".csv")
        csv_second = sorted(p for p in second if p.suffix == ".csv")
        assert [p.name for p in csv_first] == [f"fig3_M{M}.csv" for M in (100, 40, 60, 80)]
        for a, b in zip(csv_first, csv_second):
            assert a.read_bytes() == b.read_bytes()
        table = pd.read_csv(csv_first[0])
        assert np.all(np.isfinite(table.to_numpy()))
        assert np.all(np.diff(table["analytic_y"]) >= 0)

    def test_error_figure_rows_are_finite(self, tmp_path):
        paths = run_figure("fig6", ExperimentConfig(trials=10), tmp_path)
        for path in (p for p in paths if p.suffix == ".csv"):
            table = pd.read_csv(path)
            assert len(table) == 7
            assert np.all(np.isfinite(table.drop(columns="mc_ci_low").to_numpy()))
            low = table["mc_ci_low"].dropna()
            assert np.all(low <= table.loc[low.index, "mc_y"])
            assert np.all(table["analytic_y"] < 0)

    def test_nonpositive_ratio_bound_is_nan(self):
        low, high = ratio_interval_db(-0.002, 0.1)
        assert math.isnan(low)
        assert high == pytest.approx(-10.0)
        assert ratio_interval_db(0.01, 1.0) == pytest.approx((-20.0, 0.0))
        assert math.isnan(ratio_interval_db(0.0, 1.0)[0])

    def test_unknown_figure(self, tmp_path):
        with pytest.raises(ValueError, match="unknown figure"):
            run_figure("fig9", ExperimentConfig(), tmp_path)


class TestValidation:
    def test_report_format(self, tmp_path):
        results = [
            CheckResult("a", True, True, 1.0, 1.0, 0.0),
            CheckResult("b", False, False, 2.0, 1.0, 0.5, note="informational"),
        ]
        path = write_report(results, tmp_path / "report.jsonl")
        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert [r["check"] for r in records] == ["a", "b"]
        assert set(records[0]) == {
            "check", "passed", "required", "measured", "expected", "tolerance", "note",
        }
        assert all_required_passed(results)
        assert not all_required_passed(results + [CheckResult("c", False, True, 0, 0, 0)])

    def test_report_keeps_small_deltas(self, tmp_path):
        results = [
            CheckResult("tiny", True, True, 3.2e-13, 0.0, 1e-12),
            CheckResult("undefined", False, False, float("nan"), 1.0, 0.0),
        ]
        path = write_report(results, tmp_path / "report.jsonl")
        tiny, undefined = [json.loads(line) for line in path.read_text().splitlines()]
        assert tiny["measured"] == 3.2e-13
        assert tiny["tolerance"] == 1e-12
        assert tiny["measured"] < tiny["tolerance"]
        assert undefined["measured"] is None

    def test_asymptote_checks_pass(self):
        suite = ValidationSuite(ExperimentConfig())
        suite.check_asymptote()
        suite.check_saturation()
        assert all(r.passed for r in suite.results)

    def test_printed_coefficients_are_informational(self):
        suite = ValidationSuite(ExperimentConfig(trials=200))
        suite.check_ser()
        by_name = {r.check: r for r in suite.results}
        printed = by_name["ser.printed_bound"]
        assert not printed.required
        assert printed.measured > 0
        assert by_name["ser.upper_bound"].measured == 0
        assert "37%" in by_name["ser.bound_gap"].note

    def test_corrupted_theta_fails_law_check(self):
        suite = ValidationSuite(ExperimentConfig(trials=2000), corrupt_theta=True)
        suite.check_sinr_law()
        law = next(r for r in suite.results if r.check == "sinr_law.ks")
        assert not law.passed
        assert law.measured > law.tolerance
        assert not all_required_passed(suite.results)

    @pytest.mark.slow
    def test_default_suite_passes(self, tmp_path):
        code = main(["validate", "--out", str(tmp_path)])
        records = [json.loads(line) for line in (tmp_path / "validation.jsonl").read_text().splitlines()]
        failed = [r["check"] for r in records if r["required"] and not r["passed"]]
        assert failed == []
        assert code == 0
        assert not any(math.isnan(r["measured"]) for r in records if r["measured"] is not None)
