"""
Command-line front end.

    zf-uplink figure fig3 --out results/
    zf-uplink analytic outage --grid -5:20:26
    zf-uplink montecarlo --trials 2000 --set M=50
    zf-uplink validate --out results/
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from src.zfuplink.analytic import (
    asymptotic_sinr,
    ergodic_rate,
    outage,
    ser_exact,
    ser_upper,
    sinr_cdf,
    sinr_pdf,
)
from src.zfuplink.montecarlo import TrialPlan, run_ser_trials, run_sinr_trials
from src.zfuplink.system_model import db_to_linear

from .config import ExperimentConfig, apply_overrides, load_config, parse_assignments
from .figures import FIGURES, run_figure
from .validation import all_required_passed, run_validation

logger = logging.getLogger(__name__)

QUANTITIES = ("pdf", "cdf", "outage", "rate", "ser", "asymptote")
PDF_GRID_POINTS = 4001


def parse_grid(text: str) -> np.ndarray:
    """`start:stop:num` (inclusive linspace) or a comma-separated list."""
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError
            start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
            if num < 1:
                raise ValueError
            return np.linspace(start, stop, num)
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"invalid grid {text!r}: expected start:stop:num or a comma list") from None
    if not values:
        raise ValueError(f"invalid grid {text!r}: no values")
    return np.array(values)


def _default_grid(quantity: str, config: ExperimentConfig) -> np.ndarray:
    if quantity in ("pdf", "cdf"):
        params = config.sinr_params()
        n = params.shape
        upper = float(params.sinr_of(params.scale_x * (n + 12.0 * np.sqrt(n) + 30.0)))
        return np.linspace(0.0, upper, PDF_GRID_POINTS)
    if quantity == "outage":
        return np.linspace(-5.0, 20.0, 26)
    if quantity == "rate":
        return np.linspace(-10.0, 30.0, 9)
    if quantity == "ser":
        return np.arange(20, 101, 10, dtype=float)
    return np.array([])


def analytic_table(config: ExperimentConfig, quantity: str, grid: Optional[np.ndarray]) -> pd.DataFrame:
    """Evaluate one closed form over a grid; no simulation."""
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}, expected one of {QUANTITIES}")
    if grid is None:
        grid = _default_grid(quantity, config)

    if quantity == "asymptote":
        profile = config.profile()
        users = np.arange(config.K)
        return pd.DataFrame(
            {"user": users, "sinr": [asymptotic_sinr(profile, config.cell, k) for k in users]}
        )
    if quantity == "pdf":
        params = config.sinr_params()
        inside = grid[(grid >= 0) & (grid < params.sinr_ceiling)]
        return pd.DataFrame({"sinr": inside, "pdf": np.atleast_1d(sinr_pdf(params, inside))})
    if quantity == "cdf":
        if np.any(grid < 0):
            raise ValueError("cdf grid must be nonnegative")
        return pd.DataFrame({"sinr": grid, "cdf": np.atleast_1d(sinr_cdf(config.sinr_params(), grid))})
    if quantity == "outage":
        params = config.sinr_params()
        values = [outage(params, db_to_linear(t)) for t in grid]
        return pd.DataFrame({"gamma_th_db": grid, "outage": values})
    if quantity == "rate":
        values = [ergodic_rate(config.with_updates(snr_db=float(s)).sinr_params()) for s in grid]
        return pd.DataFrame({"snr_db": grid, "rate": values})

    exact, bound = [], []
    for M in grid:
        if not float(M).is_integer():
            raise ValueError(f"antenna count {M} is not an integer")
        params = config.with_updates(M=int(M)).sinr_params(include_noise=True)
        exact.append(ser_exact(params, config.qam_order))
        bound.append(ser_upper(params, config.qam_order))
    return pd.DataFrame({"M": grid.astype(int), "ser": exact, "ser_upper": bound})


def cmd_figure(args, config: ExperimentConfig) -> int:
    run_figure(args.figure_id, config, args.out, progress=args.progress)
    return 0


def cmd_analytic(args, config: ExperimentConfig) -> int:
    config.validate()
    grid = parse_grid(args.grid) if args.grid else None
    table = analytic_table(config, args.quantity, grid)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"analytic_{args.quantity}.csv"
    table.to_csv(path, index=False)
    logger.info("wrote %s (%d rows)", path, len(table))
    return 0


def cmd_montecarlo(args, config: ExperimentConfig) -> int:
    config.validate()
    plan = TrialPlan(
        cfg=config.system(),
        profile=config.profile(),
        master_seed=config.seed,
        num_trials=config.trials,
        cell=config.cell,
        user=config.user,
        symbols_per_trial=args.symbols,
        gamma_th=config.gamma_th,
        include_noise=args.ser,
    )
    runner = run_ser_trials if args.ser else run_sinr_trials
    stats = runner(plan, workers=config.workers, progress=args.progress)
    summary = {
        "trials": stats.trial_count,
        "mean_sinr": stats.mean_sinr,
        "median_sinr": stats.median_sinr,
        "mean_rate": stats.mean_rate,
        "mean_sum_rate": stats.mean_sum_rate,
        "outage_threshold_db": config.gamma_th_db,
        "outage_rate": stats.outage_rate,
        "ser": stats.ser_estimate,
        "redraws": stats.redraw_count,
        "normalized_error_db": stats.normalized_error_db,
    }
    summary.update({f"se_{k}": v for k, v in stats.std_errors.items()})
    args.out.mkdir(parents=True, exist_ok=True)
    summary_path = args.out / "montecarlo_summary.csv"
    pd.DataFrame([summary]).to_csv(summary_path, index=False)
    ecdf_path = args.out / "montecarlo_ecdf.csv"
    pd.DataFrame({"sinr": stats.empirical_cdf}).to_csv(ecdf_path, index=False)
    logger.info("wrote %s and %s", summary_path, ecdf_path)
    return 0


def cmd_validate(args, config: ExperimentConfig) -> int:
    report = args.out / "validation.jsonl"
    results = run_validation(config, report, corrupt_theta=args.corrupt_theta, progress=args.progress)
    return 0 if all_required_passed(results) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value or YAML configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--trials", type=int, help="Monte-Carlo trials per point")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key"
    )
    common.add_argument("--log-level", default="INFO", help="logging level")
    common.add_argument("--progress", action="store_true", help="show a trial progress bar")

    parser = argparse.ArgumentParser(
        prog="zf-uplink", description="ZF uplink analysis under imperfect CSI"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    figure = sub.add_parser("figure", parents=[common], help="reproduce one figure as CSV + SVG")
    figure.add_argument("figure_id", choices=sorted(FIGURES))
    figure.set_defaults(handler=cmd_figure)

    analytic = sub.add_parser("analytic", parents=[common], help="evaluate a closed form on a grid")
    analytic.add_argument("quantity", choices=QUANTITIES)
    analytic.add_argument("--grid", help="start:stop:num or comma-separated values")
    analytic.set_defaults(handler=cmd_analytic)

    montecarlo = sub.add_parser("montecarlo", parents=[common], help="run seeded trials")
    montecarlo.add_argument("--ser", action="store_true", help="simulate QAM symbol errors")
    montecarlo.add_argument("--symbols", type=int, default=1, help="symbols per user and trial")
    montecarlo.set_defaults(handler=cmd_montecarlo)

    validate = sub.add_parser("validate", parents=[common], help="run the oracle-agreement suite")
    validate.add_argument("--corrupt-theta", action="store_true", help="double theta in the SINR-law check")
    validate.set_defaults(handler=cmd_validate)
    return parser


def resolve_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = parse_assignments(args.set)
    for key in ("seed", "trials", "workers"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    return apply_overrides(config, overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = resolve_config(args)
        return args.handler(args, config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
