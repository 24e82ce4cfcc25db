"""
Seeded Monte-Carlo trials of the estimation -> ZF detection chain.

Every trial owns its random stream:

    Generator(Philox(SeedSequence(entropy=master_seed, spawn_key=(trial, attempt))))

so trial i can be replayed on its own, and results do not depend on how the
trials are split across worker processes. A rank-deficient estimate moves
the trial to the next `attempt` key and is counted as a re-draw.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from tqdm import tqdm

from .channel import (
    ChannelRealization,
    complex_gaussian,
    draw_channels,
    estimation_error_traces,
    mmse_estimate,
    pilot_observation,
)
from .modulation import qam_slice, random_symbols
from .receiver import RankDeficientChannelError, ZfReceiver, build_zf, detect, instantaneous_sinr
from .system_model import FadingProfile, SinrParams, SystemConfig, derive_cell_params, validate_config

logger = logging.getLogger(__name__)

MAX_REDRAWS = 16
MIN_KS_SAMPLES = 100
_SEED_LIMIT = 2**64


def trial_rng(master_seed: int, trial_index: int, attempt: int = 0) -> np.random.Generator:
    """Counter-based generator for one (trial, attempt) pair."""
    sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial_index, attempt))
    return np.random.Generator(np.random.Philox(sequence))


@dataclass(frozen=True, eq=False)
class TrialPlan:
    """
    Everything a batch of trials depends on.

    Attributes:
        cfg: system configuration
        profile: large-scale gains matching cfg
        master_seed: unsigned 64-bit seed
        num_trials: number of channel realizations
        cell: observing BS
        user: focus user for the ECDF, mean rate and outage
        symbols_per_trial: data symbols per user and realization (SER runs)
        gamma_th: outage threshold (linear), optional
        include_noise: derive theta from the full error trace
    """

    cfg: SystemConfig
    profile: FadingProfile
    master_seed: int
    num_trials: int
    cell: int = 0
    user: int = 0
    symbols_per_trial: int = 1
    gamma_th: Optional[float] = None
    include_noise: bool = False

    def __post_init__(self):
        validate_config(self.cfg)
        self.profile.check_against(self.cfg)
        if not 0 <= self.master_seed < _SEED_LIMIT:
            raise ValueError(f"master_seed={self.master_seed} must be an unsigned 64-bit integer")
        if self.num_trials < 1:
            raise ValueError(f"num_trials={self.num_trials} must be >= 1")
        if self.symbols_per_trial < 1:
            raise ValueError(f"symbols_per_trial={self.symbols_per_trial} must be >= 1")
        if not 0 <= self.cell < self.cfg.L:
            raise ValueError(f"cell={self.cell} outside 0..{self.cfg.L - 1}")
        if not 0 <= self.user < self.cfg.K:
            raise ValueError(f"user={self.user} outside 0..{self.cfg.K - 1}")
        if self.gamma_th is not None and self.gamma_th < 0:
            raise ValueError(f"gamma_th={self.gamma_th} must be nonnegative")

    def sinr_params(self) -> List[SinrParams]:
        alpha = estimation_error_traces(self.cfg, self.profile, self.cell, self.include_noise)
        return derive_cell_params(self.cfg, self.profile, self.cell, alpha)


@dataclass(frozen=True, eq=False)
class TrialRecord:
    sinr: np.ndarray
    error_power: np.ndarray
    error_ratio: float
    attempts: int
    symbol_errors: int = 0


@dataclass(frozen=True, eq=False)
class AggregateStats:
    """
    Statistics of one batch of trials.

    `empirical_cdf` holds the sorted SINR samples of the focus user; every
    scalar statistic without a subscript refers to that user as well.
    """

    trial_count: int
    user: int
    empirical_cdf: np.ndarray
    mean_sinr: float
    median_sinr: float
    mean_rate: float
    per_user_mean_rate: np.ndarray
    mean_sum_rate: float
    std_errors: Dict[str, float]
    outage_threshold: Optional[float]
    outage_rate: float
    ser_estimate: float
    symbol_count: int
    error_count: int
    redraw_count: int
    mean_error_variance: np.ndarray
    mean_error_ratio: float
    normalized_error_db: float

    def ecdf(self, x: float) -> float:
        """Fraction of samples strictly below x."""
        return float(np.searchsorted(self.empirical_cdf, x, side="left") / self.trial_count)


def _realize(
    plan: TrialPlan, rng: np.random.Generator
) -> Tuple[ChannelRealization, np.ndarray, ZfReceiver]:
    realization = draw_channels(plan.cfg, plan.profile, plan.cell, rng)
    y_tilde = pilot_observation(plan.cfg, realization, rng)
    estimate = mmse_estimate(plan.cfg, plan.profile, realization, y_tilde)
    return realization, estimate.xi, build_zf(estimate.G_hat)


def _count_symbol_errors(
    plan: TrialPlan,
    realization: ChannelRealization,
    receiver: ZfReceiver,
    rng: np.random.Generator,
) -> int:
    cfg = plan.cfg
    labels, symbols = random_symbols(rng, cfg.qam_order, (cfg.L, cfg.K, plan.symbols_per_trial))
    noise = complex_gaussian(rng, (cfg.M, plan.symbols_per_trial))
    y = math.sqrt(cfg.P_u) * np.einsum("imk,iks->ms", realization.G, symbols) + noise
    decided = qam_slice(detect(receiver, y), cfg.qam_order, p_u=cfg.P_u)
    return int(np.count_nonzero(decided != labels[plan.cell]))


def run_trial(
    plan: TrialPlan, params: Sequence[SinrParams], index: int, with_symbols: bool = False
) -> TrialRecord:
    """
    One realization, re-drawn on rank deficiency.

    Raises:
        RankDeficientChannelError: MAX_REDRAWS re-draws in a row failed
    """
    for attempt in range(MAX_REDRAWS + 1):
        rng = trial_rng(plan.master_seed, index, attempt)
        try:
            realization, xi, receiver = _realize(plan, rng)
        except RankDeficientChannelError:
            logger.warning("trial %d attempt %d: rank-deficient estimate, re-drawing", index, attempt)
            continue
        desired = realization.desired
        record = TrialRecord(
            sinr=instantaneous_sinr(plan.cfg, params, receiver).sinr,
            error_power=np.mean(np.abs(xi) ** 2, axis=0),
            error_ratio=float(np.sum(np.abs(xi) ** 2) / np.sum(np.abs(desired) ** 2)),
            attempts=attempt + 1,
            symbol_errors=_count_symbol_errors(plan, realization, receiver, rng) if with_symbols else 0,
        )
        return record
    raise RankDeficientChannelError(
        f"trial {index}: {MAX_REDRAWS + 1} consecutive rank-deficient draws"
    )


def _run_chunk(
    plan: TrialPlan, params: Sequence[SinrParams], with_symbols: bool, bounds: Tuple[int, int]
) -> List[TrialRecord]:
    start, stop = bounds
    logger.debug("trials %d..%d", start, stop - 1)
    return [run_trial(plan, params, i, with_symbols) for i in range(start, stop)]


def _chunks(num_trials: int, workers: int) -> List[Tuple[int, int]]:
    size = max(1, math.ceil(num_trials / (4 * workers)))
    return [(start, min(start + size, num_trials)) for start in range(0, num_trials, size)]


def _collect(
    plan: TrialPlan, with_symbols: bool, workers: int, progress: bool
) -> Tuple[List[SinrParams], List[TrialRecord]]:
    if workers < 1:
        raise ValueError(f"workers={workers} must be >= 1")
    params = plan.sinr_params()
    logger.info(
        "running %d trials (M=%d K=%d L=%d, %s) on %d worker(s)",
        plan.num_trials,
        plan.cfg.M,
        plan.cfg.K,
        plan.cfg.L,
        "SER" if with_symbols else "SINR",
        workers,
    )
    if workers == 1:
        records = [
            run_trial(plan, params, i, with_symbols)
            for i in tqdm(range(plan.num_trials), disable=not progress, desc="trials")
        ]
    else:
        kernel = partial(_run_chunk, plan, params, with_symbols)
        chunks = _chunks(plan.num_trials, workers)
        records = []
        with ProcessPoolExecutor(max_workers=workers) as executor:
            # map yields in submission order, so the merge is deterministic
            for batch in tqdm(
                executor.map(kernel, chunks), total=len(chunks), disable=not progress, desc="chunks"
            ):
                records.extend(batch)
    return params, records


def _standard_error(samples: np.ndarray) -> float:
    if samples.size < 2:
        return math.nan
    return float(np.std(samples, ddof=1) / math.sqrt(samples.size))


def _proportion_error(p: float, n: int) -> float:
    if n == 0 or math.isnan(p):
        return math.nan
    return math.sqrt(p * (1.0 - p) / n)


def aggregate(plan: TrialPlan, records: Sequence[TrialRecord], with_symbols: bool) -> AggregateStats:
    n = len(records)
    if n == 0:
        raise ValueError("cannot aggregate zero trials")
    sinr = np.stack([r.sinr for r in records])
    focus = sinr[:, plan.user]
    rates = np.log2(1.0 + sinr)
    sum_rates = rates.sum(axis=1)
    empirical_cdf = np.sort(focus)

    if plan.gamma_th is None:
        outage_rate = math.nan
    else:
        outage_rate = float(np.searchsorted(empirical_cdf, plan.gamma_th, side="left") / n)

    symbol_count = n * plan.cfg.K * plan.symbols_per_trial if with_symbols else 0
    error_count = int(sum(r.symbol_errors for r in records))
    ser_estimate = error_count / symbol_count if symbol_count else math.nan

    ratios = np.array([r.error_ratio for r in records])
    ratio = float(ratios.mean())
    return AggregateStats(
        trial_count=n,
        user=plan.user,
        empirical_cdf=empirical_cdf,
        mean_sinr=float(focus.mean()),
        median_sinr=float(np.median(focus)),
        mean_rate=float(rates[:, plan.user].mean()),
        per_user_mean_rate=rates.mean(axis=0),
        mean_sum_rate=float(sum_rates.mean()),
        std_errors={
            "sinr": _standard_error(focus),
            "rate": _standard_error(rates[:, plan.user]),
            "sum_rate": _standard_error(sum_rates),
            "outage": _proportion_error(outage_rate, n),
            "ser": _proportion_error(ser_estimate, symbol_count),
            "error_ratio": _standard_error(ratios),
        },
        outage_threshold=plan.gamma_th,
        outage_rate=outage_rate,
        ser_estimate=ser_estimate,
        symbol_count=symbol_count,
        error_count=error_count,
        redraw_count=int(sum(r.attempts - 1 for r in records)),
        mean_error_variance=np.mean(np.stack([r.error_power for r in records]), axis=0),
        mean_error_ratio=ratio,
        normalized_error_db=10.0 * math.log10(ratio) if ratio > 0 else -math.inf,
    )


def run_sinr_trials(plan: TrialPlan, workers: int = 1, progress: bool = False) -> AggregateStats:
    """
    SINR statistics over `plan.num_trials` realizations.

    Per trial: draw channels, pilot observation, MMSE estimate, ZF receiver,
    instantaneous SINR. Identical plans give identical statistics for any
    worker count.
    """
    _, records = _collect(plan, False, workers, progress)
    result = aggregate(plan, records, with_symbols=False)
    logger.info(
        "SINR run done: mean=%.4g median=%.4g redraws=%d",
        result.mean_sinr,
        result.median_sinr,
        result.redraw_count,
    )
    return result


def run_ser_trials(plan: TrialPlan, workers: int = 1, progress: bool = False) -> AggregateStats:
    """
    Symbol error rate of the full transmit chain.

    Every user of every cell sends `symbols_per_trial` uniform QAM symbols;
    BS `plan.cell` applies ZF, slices, and counts errors over its K users.
    """
    _, records = _collect(plan, True, workers, progress)
    result = aggregate(plan, records, with_symbols=True)
    logger.info(
        "SER run done: %d/%d symbol errors (%.4g)",
        result.error_count,
        result.symbol_count,
        result.ser_estimate,
    )
    return result


def ks_statistic(samples: Sequence[float], cdf: Callable[[float], float]) -> float:
    """Kolmogorov-Smirnov distance between the samples and a continuous CDF."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < MIN_KS_SAMPLES:
        raise ValueError(f"KS statistic needs at least {MIN_KS_SAMPLES} samples, got {samples.size}")
    return float(stats.kstest(samples, np.vectorize(cdf, otypes=[float])).statistic)


def ks_critical_value(n: int, confidence: float = 0.99) -> float:
    """Asymptotic one-sample KS critical value c(alpha) / sqrt(n)."""
    return float(stats.kstwobign.ppf(confidence) / math.sqrt(n))


def binomial_ci(successes: int, trials: int, confidence: float = 0.99) -> Tuple[float, float]:
    """Clopper-Pearson interval."""
    if trials < 1:
        raise ValueError(f"trials={trials} must be >= 1")
    interval = stats.binomtest(successes, trials).proportion_ci(
        confidence_level=confidence, method="exact"
    )
    return float(interval.low), float(interval.high)


def mean_ci(mean: float, std_error: float, confidence: float = 0.99) -> Tuple[float, float]:
    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    return mean - z * std_error, mean + z * std_error
