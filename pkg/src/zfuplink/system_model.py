"""
System model for the multicell massive MIMO uplink.

Everything the estimation, detection and closed-form layers share:
- SystemConfig: cell/user/antenna counts, pilot and coherence lengths, power
- FadingProfile: large-scale gains beta[i, l, k] (source cell i, observing
  BS l, user k)
- SinrParams: per-user constants (theta, eta, beta_hat, Gamma law of X, rate
  constants) consumed by every closed form in `analytic`

Profiles come from the symmetric cross-gain scenario or from a 7-cell
hexagonal layout with log-normal shadowing.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

SUPPORTED_QAM_ORDERS = (4, 16, 64, 256)
MAX_HEX_CELLS = 7
DEFAULT_MIN_DISTANCE_M = 100.0

ArrayLike = Union[float, np.ndarray]


def db_to_linear(value_db: float) -> float:
    return float(10.0 ** (value_db / 10.0))


def linear_to_db(value: float) -> float:
    if value <= 0:
        raise ValueError(f"cannot express {value} in dB")
    return float(10.0 * math.log10(value))


@dataclass(frozen=True)
class SystemConfig:
    """
    Uplink dimensions and transmit power.

    P_u is normalized to unit noise variance, so the linear SNR equals P_u.
    """

    L: int
    K: int
    M: int
    tau_u: int
    T: int
    P_u: float
    qam_order: int = 4

    @classmethod
    def from_snr_db(cls, snr_db: float, **kwargs) -> "SystemConfig":
        return cls(P_u=db_to_linear(snr_db), **kwargs)

    @property
    def snr_db(self) -> float:
        return linear_to_db(self.P_u)

    @property
    def pilot_power(self) -> float:
        """tau_u * P_u, the effective pilot SNR after despreading."""
        return self.tau_u * self.P_u

    @property
    def data_fraction(self) -> float:
        return (self.T - self.tau_u) / self.T

    def with_updates(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


def validate_config(cfg: SystemConfig) -> SystemConfig:
    """
    Check every SystemConfig invariant.

    Returns:
        cfg, unchanged

    Raises:
        ValueError: naming the first violated invariant
    """
    for name in ("L", "K", "M", "tau_u", "T", "qam_order"):
        value = getattr(cfg, name)
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise ValueError(f"{name}={value!r} must be an integer")
    if cfg.L < 1:
        raise ValueError(f"L={cfg.L} < 1: at least one cell is required")
    if cfg.K < 1:
        raise ValueError(f"K={cfg.K} < 1: at least one user per cell is required")
    if cfg.M < cfg.K:
        raise ValueError(f"M={cfg.M} < K={cfg.K}: ZF needs at least as many antennas as users")
    if cfg.tau_u < cfg.K:
        raise ValueError(f"tau_u={cfg.tau_u} < K={cfg.K}: not enough orthogonal pilots")
    if cfg.T <= cfg.tau_u:
        raise ValueError(f"T={cfg.T} <= tau_u={cfg.tau_u}: no symbols left for data")
    if not (cfg.P_u > 0 and math.isfinite(cfg.P_u)):
        raise ValueError(f"P_u={cfg.P_u} must be positive and finite")
    if cfg.qam_order not in SUPPORTED_QAM_ORDERS:
        raise ValueError(
            f"qam_order={cfg.qam_order} not supported, expected one of {SUPPORTED_QAM_ORDERS}"
        )
    return cfg


@dataclass(frozen=True, eq=False)
class FadingProfile:
    """Large-scale gains indexed (source cell, observing BS, user)."""

    beta: np.ndarray

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        if beta.ndim != 3 or beta.shape[0] != beta.shape[1]:
            raise ValueError(f"beta must have shape (L, L, K), got {beta.shape}")
        if not np.all(np.isfinite(beta)) or np.any(beta < 0):
            raise ValueError("beta entries must be finite and nonnegative")
        desired = np.einsum("llk->lk", beta)
        if np.any(desired <= 0):
            raise ValueError("desired-link gains beta[l, l, k] must be positive")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @property
    def num_cells(self) -> int:
        return self.beta.shape[0]

    @property
    def num_users(self) -> int:
        return self.beta.shape[2]

    def column(self, cell: int, user: int) -> np.ndarray:
        """Gains of user `user` from every source cell as seen by BS `cell`."""
        return self.beta[:, cell, user]

    def subset(self, num_cells: int) -> "FadingProfile":
        if not 1 <= num_cells <= self.num_cells:
            raise ValueError(f"cannot take {num_cells} cells from a {self.num_cells}-cell profile")
        return FadingProfile(self.beta[:num_cells, :num_cells, :])

    def check_against(self, cfg: SystemConfig) -> "FadingProfile":
        expected = (cfg.L, cfg.L, cfg.K)
        if self.beta.shape != expected:
            raise ValueError(f"profile shape {self.beta.shape} does not match config {expected}")
        return self


def fixed_cross_gain_profile(cfg: SystemConfig, cross_gain: float) -> FadingProfile:
    """
    Symmetric scenario: unit desired gains, every interfering link at `cross_gain`.
    """
    if not 0.0 <= cross_gain <= 1.0:
        raise ValueError(f"cross_gain={cross_gain} outside [0, 1]")
    beta = np.full((cfg.L, cfg.L, cfg.K), float(cross_gain))
    idx = np.arange(cfg.L)
    beta[idx, idx, :] = 1.0
    return FadingProfile(beta)


def large_scale_gain(shadowing: ArrayLike, distance_m: ArrayLike, pathloss_exp: float) -> ArrayLike:
    """beta = z / r^gamma."""
    return np.asarray(shadowing, dtype=float) / np.asarray(distance_m, dtype=float) ** pathloss_exp


def hexagon_base_stations(num_cells: int, radius_m: float) -> np.ndarray:
    """
    Base-station coordinates: centre cell first, then the first tier.

    Hexagons are flat-topped with circumradius `radius_m`, so neighbouring
    centres sit sqrt(3)*radius away at 30 + 60*j degrees.
    """
    if not 1 <= num_cells <= MAX_HEX_CELLS:
        raise ValueError(f"hexagonal layout supports 1..{MAX_HEX_CELLS} cells, got {num_cells}")
    angles = np.deg2rad(30.0 + 60.0 * np.arange(MAX_HEX_CELLS - 1))
    ring = math.sqrt(3.0) * radius_m * np.column_stack([np.cos(angles), np.sin(angles)])
    stations = np.vstack([np.zeros((1, 2)), ring])
    return stations[:num_cells]


def _inside_hexagon(points: np.ndarray, radius_m: float) -> np.ndarray:
    x = np.abs(points[:, 0])
    y = np.abs(points[:, 1])
    half_height = math.sqrt(3.0) / 2.0 * radius_m
    return (y <= half_height) & (math.sqrt(3.0) * x + y <= math.sqrt(3.0) * radius_m)


def sample_hexagon_users(
    rng: np.random.Generator, count: int, radius_m: float, min_distance_m: float
) -> np.ndarray:
    """Uniform positions in a BS-centred hexagon, excluding a disc around the BS."""
    half_height = math.sqrt(3.0) / 2.0 * radius_m
    accepted: List[np.ndarray] = []
    remaining = count
    while remaining > 0:
        batch = max(2 * remaining, 16)
        candidates = np.column_stack(
            [
                rng.uniform(-radius_m, radius_m, batch),
                rng.uniform(-half_height, half_height, batch),
            ]
        )
        keep = _inside_hexagon(candidates, radius_m)
        keep &= np.hypot(candidates[:, 0], candidates[:, 1]) >= min_distance_m
        chosen = candidates[keep][:remaining]
        accepted.append(chosen)
        remaining -= len(chosen)
    return np.vstack(accepted)


def hexagonal_profile(
    cfg: SystemConfig,
    radius_m: float,
    pathloss_exp: float,
    shadow_std_db: float,
    rng_seed: int,
    min_distance_m: float = DEFAULT_MIN_DISTANCE_M,
    normalize: bool = False,
) -> FadingProfile:
    """
    Random user drop over a hexagonal layout with log-normal shadowing.

    Users are uniform over their own hexagon outside `min_distance_m`.
    Shadowing z = 10^(sigma * N(0,1) / 10) is drawn independently per
    (source cell, observing BS, user).

    Args:
        cfg: system configuration, L <= 7
        radius_m: hexagon circumradius
        pathloss_exp: path-loss exponent gamma
        shadow_std_db: shadowing standard deviation in dB
        rng_seed: seed; equal seeds give bit-identical profiles
        min_distance_m: exclusion radius around each BS
        normalize: scale gains by radius^gamma (cell-edge user without
            shadowing has unit gain)

    Returns:
        FadingProfile of shape (L, L, K)
    """
    if radius_m <= 0:
        raise ValueError(f"radius_m={radius_m} must be positive")
    if pathloss_exp <= 0:
        raise ValueError(f"pathloss_exp={pathloss_exp} must be positive")
    if shadow_std_db < 0:
        raise ValueError(f"shadow_std_db={shadow_std_db} must be nonnegative")
    if not 0.0 <= min_distance_m < math.sqrt(3.0) / 2.0 * radius_m:
        raise ValueError(f"min_distance_m={min_distance_m} must lie inside the hexagon")

    rng = np.random.default_rng(rng_seed)
    stations = hexagon_base_stations(cfg.L, radius_m)
    offsets = sample_hexagon_users(rng, cfg.L * cfg.K, radius_m, min_distance_m)
    users = stations[:, None, :] + offsets.reshape(cfg.L, cfg.K, 2)

    # distance[i, l, k]: user k of cell i to BS l
    delta = users[:, None, :, :] - stations[None, :, None, :]
    distance = np.hypot(delta[..., 0], delta[..., 1])
    shadowing = 10.0 ** (shadow_std_db * rng.standard_normal(distance.shape) / 10.0)

    beta = large_scale_gain(shadowing, distance, pathloss_exp)
    if normalize:
        beta = beta * radius_m**pathloss_exp
    logger.debug(
        "hexagonal drop: L=%d K=%d seed=%s min beta=%.3e max beta=%.3e",
        cfg.L,
        cfg.K,
        rng_seed,
        float(beta.min()),
        float(beta.max()),
    )
    return FadingProfile(beta)


@dataclass(frozen=True)
class SinrParams:
    """
    Per-user constants of the ZF SINR law gamma = X / (theta + eta * X).

    X ~ Gamma(shape, scale_x) with shape = M - K + 1.
    """

    theta: float
    eta: float
    beta_hat: float
    shape: int
    scale_x: float
    theta_eff: float
    a: float
    b: float
    kappa_eff: float

    @property
    def order(self) -> int:
        """M - K."""
        return self.shape - 1

    @property
    def sinr_ceiling(self) -> float:
        return 1.0 / self.eta if self.eta > 0 else math.inf

    def sinr_of(self, x: ArrayLike) -> ArrayLike:
        return x / (self.theta + self.eta * x)


def pilot_beta_hat(cfg: SystemConfig, profile: FadingProfile, cell: int) -> np.ndarray:
    """beta_hat for every user of `cell`: sum_j beta[j, cell, k] + 1/(tau_u P_u)."""
    return profile.beta[:, cell, :].sum(axis=0) + 1.0 / cfg.pilot_power


def derive_sinr_params(
    cfg: SystemConfig,
    profile: FadingProfile,
    cell: int,
    user: int,
    alpha: Sequence[float],
) -> SinrParams:
    """
    Build the analytic parameter bundle of one user.

    Args:
        cfg: system configuration
        profile: large-scale gains matching cfg
        cell: observing BS index
        user: user index in that cell
        alpha: per-source-cell error traces from estimation_error_traces

    Returns:
        SinrParams
    """
    profile.check_against(cfg)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (cfg.L,):
        raise ValueError(f"alpha must hold one trace per cell ({cfg.L}), got shape {alpha.shape}")

    column = profile.column(cell, user)
    desired_sq = column[cell] ** 2
    # interferers summed on their own: eta must be exactly 0 without them
    cross_sq = float(np.sum(np.delete(column, cell) ** 2))
    total_sq = desired_sq + cross_sq

    beta_hat = float(column.sum() + 1.0 / cfg.pilot_power)
    theta = float(alpha.sum() + 1.0 / cfg.P_u)
    eta = cross_sq / desired_sq
    scale_x = desired_sq / beta_hat

    return SinrParams(
        theta=theta,
        eta=eta,
        beta_hat=beta_hat,
        shape=cfg.M - cfg.K + 1,
        scale_x=scale_x,
        theta_eff=theta / scale_x,
        a=total_sq / (beta_hat * theta),
        b=cross_sq / (beta_hat * theta),
        kappa_eff=eta * scale_x,
    )


def derive_cell_params(
    cfg: SystemConfig, profile: FadingProfile, cell: int, alpha: Sequence[float]
) -> List[SinrParams]:
    return [derive_sinr_params(cfg, profile, cell, k, alpha) for k in range(cfg.K)]
