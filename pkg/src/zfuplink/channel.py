"""
Channel draws, pilot phase and MMSE estimation under pilot contamination.

All cells reuse the same orthonormal pilot set, so the projected pilot
observation at BS l is synthesized directly:

    Y = sqrt(tau_u P_u) * sum_i G_il + W

and every estimate G_hat_il is a per-column rescaling of the same Y.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .system_model import FadingProfile, SystemConfig, pilot_beta_hat

logger = logging.getLogger(__name__)


def complex_gaussian(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """Unit-variance circular complex Gaussian entries (real draws first, then imaginary)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """
    One draw of every channel into BS `observing_cell`.

    H and G have shape (L, M, K); index 0 is the source cell.
    """

    H: np.ndarray
    G: np.ndarray
    observing_cell: int

    @property
    def desired(self) -> np.ndarray:
        return self.G[self.observing_cell]


@dataclass(frozen=True, eq=False)
class EstimationResult:
    """MMSE estimate of G_ll plus the cross-cell estimates and errors."""

    G_hat: np.ndarray
    xi: np.ndarray
    alpha: np.ndarray
    norm_err_db: float
    G_hat_all: np.ndarray
    xi_all: np.ndarray


def draw_channels(
    cfg: SystemConfig, profile: FadingProfile, cell: int, rng: np.random.Generator
) -> ChannelRealization:
    """G_il = H_il D_il^(1/2) for every source cell i."""
    H = complex_gaussian(rng, (cfg.L, cfg.M, cfg.K))
    gains = np.sqrt(profile.beta[:, cell, :])
    return ChannelRealization(H=H, G=H * gains[:, None, :], observing_cell=cell)


def pilot_observation(
    cfg: SystemConfig, realization: ChannelRealization, rng: np.random.Generator
) -> np.ndarray:
    """Projected pilot matrix at the observing BS, shape (M, K)."""
    noise = complex_gaussian(rng, (cfg.M, cfg.K))
    return math.sqrt(cfg.pilot_power) * realization.G.sum(axis=0) + noise


def estimation_error_traces(
    cfg: SystemConfig, profile: FadingProfile, cell: int, include_noise: bool = False
) -> np.ndarray:
    """
    Error traces alpha_il for every source cell i.

    alpha_il = sum_k tau P beta_ilk sum_{j != i} beta_jlk / (tau P sum_j beta_jlk + 1)

    With `include_noise` the pilot-noise share sum_k beta_ilk / (tau P sum_j beta_jlk + 1)
    is added, which makes the trace equal sum_k (beta - beta^2 / beta_hat).
    """
    column = profile.beta[:, cell, :]
    total = column.sum(axis=0)
    power = cfg.pilot_power
    denom = power * total + 1.0
    traces = power * column * (total - column) / denom
    if include_noise:
        traces = traces + column / denom
    return traces.sum(axis=1)


def error_variances(cfg: SystemConfig, profile: FadingProfile, cell: int) -> np.ndarray:
    """Per-entry variance beta - beta^2 / beta_hat of xi_il, shape (L, K)."""
    column = profile.beta[:, cell, :]
    return column - column**2 / pilot_beta_hat(cfg, profile, cell)


def normalized_error_db(G: np.ndarray, G_hat: np.ndarray) -> float:
    """
    10 log10(||G - G_hat||^2 / ||G||^2).

    A perfect estimate returns -inf.
    """
    if G.shape != G_hat.shape:
        raise ValueError(f"shape mismatch: {G.shape} vs {G_hat.shape}")
    reference = float(np.sum(np.abs(G) ** 2))
    if reference == 0.0:
        raise ValueError("normalized error undefined for an all-zero channel")
    error = float(np.sum(np.abs(G - G_hat) ** 2))
    if error == 0.0:
        return -math.inf
    return 10.0 * math.log10(error / reference)


def mmse_estimate(
    cfg: SystemConfig,
    profile: FadingProfile,
    realization: ChannelRealization,
    y_tilde: np.ndarray,
) -> EstimationResult:
    """
    MMSE channel estimate at BS `realization.observing_cell`.

    G_hat_il[:, k] = Y[:, k] / sqrt(tau P) * beta_ilk / beta_hat_lk

    Args:
        cfg: system configuration
        profile: large-scale gains
        realization: the channels behind y_tilde (for the realized error)
        y_tilde: projected pilot matrix from pilot_observation

    Returns:
        EstimationResult
    """
    cell = realization.observing_cell
    if y_tilde.shape != (cfg.M, cfg.K):
        raise ValueError(f"pilot observation must be {(cfg.M, cfg.K)}, got {y_tilde.shape}")
    weights = profile.beta[:, cell, :] / pilot_beta_hat(cfg, profile, cell)
    despread = y_tilde / math.sqrt(cfg.pilot_power)
    G_hat_all = despread[None, :, :] * weights[:, None, :]
    xi_all = realization.G - G_hat_all
    return EstimationResult(
        G_hat=G_hat_all[cell],
        xi=xi_all[cell],
        alpha=estimation_error_traces(cfg, profile, cell),
        norm_err_db=normalized_error_db(realization.G[cell], G_hat_all[cell]),
        G_hat_all=G_hat_all,
        xi_all=xi_all,
    )
