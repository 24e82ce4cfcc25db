"""
Figure scenarios: closed-form curves overlaid with Monte-Carlo points.

Each figure yields one CSV per curve (x, analytic_y, mc_y, mc_ci_low,
mc_ci_high) and an SVG overlay. Curves without a simulated counterpart
(M = inf, the SER bound) leave the Monte-Carlo columns empty.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

from src.zfuplink.analytic import (  # noqa: E402
    asymptotic_spectral_efficiency,
    ergodic_rate,
    outage,
    ser_exact,
    ser_upper,
    spectral_efficiency,
)
from src.zfuplink.channel import error_variances, estimation_error_traces  # noqa: E402
from src.zfuplink.montecarlo import (  # noqa: E402
    AggregateStats,
    TrialPlan,
    binomial_ci,
    mean_ci,
    run_ser_trials,
    run_sinr_trials,
)
from src.zfuplink.system_model import (  # noqa: E402
    FadingProfile,
    SystemConfig,
    db_to_linear,
    derive_cell_params,
    derive_sinr_params,
)

from .config import ExperimentConfig  # noqa: E402

logger = logging.getLogger(__name__)

CONFIDENCE = 0.99
SVG_HASH_SALT = "zf-uplink"


@dataclass
class Curve:
    name: str
    label: str
    x: np.ndarray
    analytic_y: np.ndarray
    mc_y: Optional[np.ndarray] = None
    mc_ci_low: Optional[np.ndarray] = None
    mc_ci_high: Optional[np.ndarray] = None

    def frame(self) -> pd.DataFrame:
        empty = np.full(len(self.x), np.nan)
        return pd.DataFrame(
            {
                "x": np.asarray(self.x, dtype=float),
                "analytic_y": np.asarray(self.analytic_y, dtype=float),
                "mc_y": empty if self.mc_y is None else self.mc_y,
                "mc_ci_low": empty if self.mc_ci_low is None else self.mc_ci_low,
                "mc_ci_high": empty if self.mc_ci_high is None else self.mc_ci_high,
            }
        )


@dataclass
class FigureResult:
    figure_id: str
    title: str
    xlabel: str
    ylabel: str
    curves: List[Curve]
    log_y: bool = False


class _PointCollector:
    """Accumulates Monte-Carlo means and intervals for one curve."""

    def __init__(self):
        self.y: List[float] = []
        self.low: List[float] = []
        self.high: List[float] = []

    def add(self, value: float, interval) -> None:
        self.y.append(value)
        self.low.append(interval[0])
        self.high.append(interval[1])

    def into(self, curve: Curve) -> Curve:
        curve.mc_y = np.array(self.y)
        curve.mc_ci_low = np.array(self.low)
        curve.mc_ci_high = np.array(self.high)
        return curve


def point_seed(master_seed: int, *keys: int) -> int:
    """Independent 64-bit seed for one point of one curve."""
    sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=keys)
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _plan(
    config: ExperimentConfig,
    cfg: SystemConfig,
    profile: FadingProfile,
    seed: int,
    **kwargs,
) -> TrialPlan:
    return TrialPlan(
        cfg=cfg,
        profile=profile,
        master_seed=seed,
        num_trials=config.trials,
        cell=config.cell,
        user=config.user,
        **kwargs,
    )


def _analytic_se(cfg: SystemConfig, profile: FadingProfile, cell: int) -> float:
    alpha = estimation_error_traces(cfg, profile, cell)
    rates = [ergodic_rate(p) for p in derive_cell_params(cfg, profile, cell, alpha)]
    return spectral_efficiency(cfg, rates)


def _mc_se(stats: AggregateStats, cfg: SystemConfig):
    scale = cfg.data_fraction
    low, high = mean_ci(stats.mean_sum_rate, stats.std_errors["sum_rate"], CONFIDENCE)
    return scale * stats.mean_sum_rate, (scale * low, scale * high)


def _spectral_efficiency_curves(
    config: ExperimentConfig,
    fig_index: int,
    x: Sequence[float],
    antenna_counts: Sequence[int],
    setup: Callable[[float, int], tuple],
    progress: bool,
) -> List[Curve]:
    """SE curves over `x` for every M; `setup(x, M)` returns (cfg, profile)."""
    curves = []
    for curve_index, M in enumerate(antenna_counts):
        analytic, points = [], _PointCollector()
        for point_index, value in enumerate(x):
            cfg, profile = setup(value, M)
            analytic.append(_analytic_se(cfg, profile, config.cell))
            seed = point_seed(config.seed, fig_index, curve_index, point_index)
            stats = run_sinr_trials(_plan(config, cfg, profile, seed), config.workers, progress)
            points.add(*_mc_se(stats, cfg))
        curves.append(points.into(Curve(f"M{M}", f"M = {M}", np.asarray(x), np.array(analytic))))
    limit = []
    for value in x:
        cfg, profile = setup(value, antenna_counts[0])
        limit.append(asymptotic_spectral_efficiency(cfg, profile, config.cell))
    curves.append(Curve("Minf", "M = inf", np.asarray(x), np.array(limit)))
    return curves


def figure_se_vs_snr(config: ExperimentConfig, progress: bool = False) -> FigureResult:
    snr = np.arange(-10.0, 30.0 + 1e-9, 5.0)
    profile = config.profile()

    def setup(snr_db: float, M: int):
        cfg = config.with_updates(snr_db=float(snr_db), M=M).system()
        return cfg, profile

    curves = _spectral_efficiency_curves(config, 1, snr, (20, 50, 100, 200, 300, 500), setup, progress)
    return FigureResult("fig1", "Spectral efficiency versus SNR", "SNR (dB)", "S (bits/s/Hz)", curves)


def figure_se_vs_cross_gain(config: ExperimentConfig, progress: bool = False) -> FigureResult:
    gains = np.round(np.arange(0.05, 1.0 + 1e-9, 0.05), 10)

    def setup(cross_gain: float, M: int):
        run = config.with_updates(scenario="fixed", cross_gain=float(cross_gain), M=M)
        return run.system(), run.profile()

    curves = _spectral_efficiency_curves(config, 2, gains, (20, 50, 100, 200, 300), setup, progress)
    return FigureResult(
        "fig2", "Spectral efficiency versus cross gain", "cross gain beta", "S (bits/s/Hz)", curves
    )


def _outage_point(stats: AggregateStats, threshold: float):
    probability = stats.ecdf(threshold)
    below = int(round(probability * stats.trial_count))
    return probability, binomial_ci(below, stats.trial_count, CONFIDENCE)


def figure_outage_vs_threshold(config: ExperimentConfig, progress: bool = False) -> FigureResult:
    thresholds_db = np.arange(-5.0, 20.0 + 1e-9, 1.0)
    thresholds = np.array([db_to_linear(t) for t in thresholds_db])
    profile = config.profile()
    curves = []
    for curve_index, M in enumerate((40, 60, 80, 100)):
        cfg = config.with_updates(M=M).system()
        alpha = estimation_error_traces(cfg, profile, config.cell)
        params = derive_sinr_params(cfg, profile, config.cell, config.user, alpha)
        seed = point_seed(config.seed, 3, curve_index)
        stats = run_sinr_trials(_plan(config, cfg, profile, seed), config.workers, progress)
        points = _PointCollector()
        for threshold in thresholds:
            points.add(*_outage_point(stats, threshold))
        curve = Curve(f"M{M}", f"M = {M}", thresholds_db, np.asarray(outage(params, thresholds)))
        curves.append(points.into(curve))
    return FigureResult(
        "fig3", "Outage probability versus threshold", "gamma_th (dB)", "P_out", curves, log_y=True
    )


def figure_outage_vs_antennas(config: ExperimentConfig, progress: bool = False) -> FigureResult:
    antennas = np.arange(20, 200 + 1, 20)
    threshold = db_to_linear(1.0)
    curves = []
    for curve_index, cross_gain in enumerate((0.05, 0.1, 0.15, 0.2)):
        run = config.with_updates(scenario="fixed", cross_gain=cross_gain)
        profile = run.profile()
        analytic, points = [], _PointCollector()
        for point_index, M in enumerate(antennas):
            cfg = run.with_updates(M=int(M)).system()
            alpha = estimation_error_traces(cfg, profile, config.cell)
            params = derive_sinr_params(cfg, profile, config.cell, config.user, alpha)
            analytic.append(outage(params, threshold))
            seed = point_seed(config.seed, 4, curve_index, point_index)
            plan = _plan(config, cfg, profile, seed, gamma_th=threshold)
            stats = run_sinr_trials(plan, config.workers, progress)
            points.add(*_outage_point(stats, threshold))
        name = f"beta{cross_gain:g}"
        curves.append(points.into(Curve(name, f"beta = {cross_gain:g}", antennas, np.array(analytic))))
    return FigureResult(
        "fig4", "Outage probability versus M", "M", "P_out", curves, log_y=True
    )


def figure_ser_vs_antennas(config: ExperimentConfig, progress: bool = False) -> FigureResult:
    antennas = np.arange(20, 100 + 1, 10)
    run = config.with_updates(scenario="fixed", cross_gain=0.1)
    profile = run.profile()
    curves = []
    for curve_index, order in enumerate((4, 16, 64)):
        exact, bound, points = [], [], _PointCollector()
        for point_index, M in enumerate(antennas):
            cfg = run.with_updates(M=int(M), qam_order=order).system()
            alpha = estimation_error_traces(cfg, profile, config.cell, include_noise=True)
            params = derive_sinr_params(cfg, profile, config.cell, config.user, alpha)
            exact.append(ser_exact(params, order))
            bound.append(ser_upper(params, order))
            seed = point_seed(config.seed, 5, curve_index, point_index)
            plan = _plan(config, cfg, profile, seed, symbols_per_trial=10, include_noise=True)
            stats = run_ser_trials(plan, config.workers, progress)
            points.add(stats.ser_estimate, binomial_ci(stats.error_count, stats.symbol_count, CONFIDENCE))
        curves.append(points.into(Curve(f"QAM{order}", f"{order}-QAM", antennas, np.array(exact))))
        curves.append(Curve(f"QAM{order}_upper", f"{order}-QAM bound", antennas, np.array(bound)))
    return FigureResult("fig5", "SER versus M", "M", "SER", curves, log_y=True)


def ratio_interval_db(low: float, high: float):
    """Interval on a power ratio in dB; a nonpositive bound has no dB value and becomes NaN."""
    return tuple(10.0 * math.log10(v) if v > 0 else math.nan for v in (low, high))


def _hex_layout(config: ExperimentConfig) -> FadingProfile:
    return config.with_updates(scenario="hex", L=7).profile()


def figure_error_vs_cells(config: ExperimentConfig, progress: bool = False) -> FigureResult:
    cells = np.arange(1, 8)
    layout = _hex_layout(config)
    curves = []
    for curve_index, M in enumerate((50, 100, 200, 300)):
        analytic, points = [], _PointCollector()
        for point_index, L in enumerate(cells):
            cfg = config.with_updates(L=int(L), M=M).system()
            profile = layout.subset(int(L))
            own = profile.beta[config.cell, config.cell, :]
            variance = error_variances(cfg, profile, config.cell)[config.cell]
            analytic.append(10.0 * math.log10(variance.sum() / own.sum()))
            seed = point_seed(config.seed, 6, curve_index, point_index)
            stats = run_sinr_trials(_plan(config, cfg, profile, seed), config.workers, progress)
            low, high = mean_ci(stats.mean_error_ratio, stats.std_errors["error_ratio"], CONFIDENCE)
            points.add(stats.normalized_error_db, ratio_interval_db(low, high))
        curves.append(points.into(Curve(f"M{M}", f"M = {M}", cells, np.array(analytic))))
    return FigureResult(
        "fig6", "Normalized estimation error versus L", "L", "error (dB)", curves
    )


def figure_se_vs_cells(config: ExperimentConfig, progress: bool = False) -> FigureResult:
    cells = np.arange(1, 8)
    layout = _hex_layout(config)
    curves = []
    for curve_index, snr_db in enumerate((-5.0, 10.0)):
        analytic, points = [], _PointCollector()
        for point_index, L in enumerate(cells):
            cfg = config.with_updates(L=int(L), M=100, snr_db=snr_db).system()
            profile = layout.subset(int(L))
            analytic.append(_analytic_se(cfg, profile, config.cell))
            seed = point_seed(config.seed, 7, curve_index, point_index)
            stats = run_sinr_trials(_plan(config, cfg, profile, seed), config.workers, progress)
            points.add(*_mc_se(stats, cfg))
        name = f"snr{snr_db:g}dB"
        curves.append(points.into(Curve(name, f"SNR = {snr_db:g} dB", cells, np.array(analytic))))
    return FigureResult("fig7", "Spectral efficiency versus L", "L", "S (bits/s/Hz)", curves)


FIGURES: Dict[str, Callable[..., FigureResult]] = {
    "fig1": figure_se_vs_snr,
    "fig2": figure_se_vs_cross_gain,
    "fig3": figure_outage_vs_threshold,
    "fig4": figure_outage_vs_antennas,
    "fig5": figure_ser_vs_antennas,
    "fig6": figure_error_vs_cells,
    "fig7": figure_se_vs_cells,
}


def render_svg(result: FigureResult, path: Path) -> None:
    sns.set_theme(style="whitegrid")
    plt.rcParams["svg.hashsalt"] = SVG_HASH_SALT
    fig, ax = plt.subplots(figsize=(7, 5))
    palette = sns.color_palette(n_colors=max(len(result.curves), 1))
    for color, curve in zip(palette, result.curves):
        style = "--" if curve.mc_y is None else "-"
        ax.plot(curve.x, curve.analytic_y, style, color=color, label=curve.label)
        if curve.mc_y is not None:
            ax.errorbar(
                curve.x,
                curve.mc_y,
                yerr=np.nan_to_num([curve.mc_y - curve.mc_ci_low, curve.mc_ci_high - curve.mc_y]),
                fmt="o",
                color=color,
                markersize=4,
                capsize=2,
            )
    if result.log_y:
        ax.set_yscale("log")
    ax.set_title(result.title)
    ax.set_xlabel(result.xlabel)
    ax.set_ylabel(result.ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_figure(result: FigureResult, out_dir: Path) -> List[Path]:
    """Write `<id>_<curve>.csv` per curve plus `<id>.svg`."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for curve in result.curves:
        path = out_dir / f"{result.figure_id}_{curve.name}.csv"
        curve.frame().to_csv(path, index=False)
        written.append(path)
    svg = out_dir / f"{result.figure_id}.svg"
    render_svg(result, svg)
    written.append(svg)
    for path in written:
        logger.info("wrote %s", path)
    return written


def run_figure(
    figure_id: str, config: ExperimentConfig, out_dir: Path, progress: bool = False
) -> List[Path]:
    if figure_id not in FIGURES:
        raise ValueError(f"unknown figure {figure_id!r}, expected one of {sorted(FIGURES)}")
    config.validate()
    logger.info("building %s with %d trials per point", figure_id, config.trials)
    return write_figure(FIGURES[figure_id](config, progress), Path(out_dir))
