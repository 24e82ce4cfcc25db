"""
Experiment configuration.

Files are either `key = value` lines (`#` starts a comment) or YAML when the
extension is .yaml/.yml. Both go through yaml.safe_load, so `7` is an int,
`10.0` a float and `true` a bool in either format.
"""

import dataclasses
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import yaml

from src.zfuplink.channel import estimation_error_traces
from src.zfuplink.system_model import (
    FadingProfile,
    SinrParams,
    SystemConfig,
    db_to_linear,
    derive_sinr_params,
    fixed_cross_gain_profile,
    hexagonal_profile,
    validate_config,
)

logger = logging.getLogger(__name__)

MAX_ANTENNAS = 4096
MAX_TRIALS = 100_000


class Scenario(Enum):
    FIXED = "fixed"
    HEX = "hex"


@dataclass
class ExperimentConfig:
    """
    Scenario, dimensions and run controls of one experiment.

    Attributes:
        L, K, M, tau_u, T: cells, users per cell, antennas, pilot length, coherence length
        snr_db: transmit SNR P_u in dB
        qam_order: square QAM order for SER
        scenario: "fixed" (unit desired gain, common cross gain) or "hex"
        cross_gain: interfering gain of the fixed scenario
        radius_m, pathloss_exp, shadow_std_db, min_distance_m, normalize_hex: hexagonal drop
        seed: master seed of every random draw
        trials, workers: Monte-Carlo size and worker processes
        cell, user: observing BS and focus user
        gamma_th_db: outage threshold in dB
    """

    L: int = 7
    K: int = 10
    M: int = 100
    tau_u: int = 10
    T: int = 196
    snr_db: float = 10.0
    qam_order: int = 4
    scenario: str = "fixed"
    cross_gain: float = 0.05
    radius_m: float = 1000.0
    pathloss_exp: float = 4.0
    shadow_std_db: float = 8.0
    min_distance_m: float = 100.0
    normalize_hex: bool = True
    seed: int = 2024
    trials: int = 10_000
    workers: int = 1
    cell: int = 0
    user: int = 0
    gamma_th_db: float = 1.0

    def validate(self) -> "ExperimentConfig":
        if self.M > MAX_ANTENNAS:
            raise ValueError(f"M={self.M} exceeds the desk-scale cap {MAX_ANTENNAS}")
        if not 1 <= self.trials <= MAX_TRIALS:
            raise ValueError(f"trials={self.trials} outside 1..{MAX_TRIALS}")
        if self.workers < 1:
            raise ValueError(f"workers={self.workers} must be >= 1")
        if self.seed < 0:
            raise ValueError(f"seed={self.seed} must be nonnegative")
        Scenario(self.scenario)
        validate_config(self.system())
        if not 0 <= self.cell < self.L:
            raise ValueError(f"cell={self.cell} outside 0..{self.L - 1}")
        if not 0 <= self.user < self.K:
            raise ValueError(f"user={self.user} outside 0..{self.K - 1}")
        return self

    def system(self) -> SystemConfig:
        return SystemConfig.from_snr_db(
            self.snr_db,
            L=self.L,
            K=self.K,
            M=self.M,
            tau_u=self.tau_u,
            T=self.T,
            qam_order=self.qam_order,
        )

    def profile(self, num_cells: Optional[int] = None) -> FadingProfile:
        """Large-scale gains; `num_cells` overrides L for cell sweeps."""
        cfg = self.system()
        if num_cells is not None:
            cfg = cfg.with_updates(L=num_cells)
        if Scenario(self.scenario) is Scenario.FIXED:
            return fixed_cross_gain_profile(cfg, self.cross_gain)
        return hexagonal_profile(
            cfg,
            radius_m=self.radius_m,
            pathloss_exp=self.pathloss_exp,
            shadow_std_db=self.shadow_std_db,
            rng_seed=self.seed,
            min_distance_m=self.min_distance_m,
            normalize=self.normalize_hex,
        )

    def sinr_params(self, include_noise: bool = False) -> SinrParams:
        cfg = self.system()
        profile = self.profile()
        alpha = estimation_error_traces(cfg, profile, self.cell, include_noise)
        return derive_sinr_params(cfg, profile, self.cell, self.user, alpha)

    @property
    def gamma_th(self) -> float:
        return db_to_linear(self.gamma_th_db)

    def with_updates(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _field_types() -> Dict[str, type]:
    return {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _as_number(value: Any) -> Optional[float]:
    """Floats, ints and numeric strings such as "1e3" (YAML reads those as text)."""
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return None
    return None


def _coerce(key: str, value: Any) -> Any:
    kind = _field_types()[key]
    if kind is bool:
        if isinstance(value, str):
            parsed = yaml.safe_load(value)
            if isinstance(parsed, bool):
                return parsed
        if isinstance(value, bool):
            return value
        raise ValueError(f"{key}={value!r} must be true or false")
    if kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        number = _as_number(value)
        if number is None or not number.is_integer():
            raise ValueError(f"{key}={value!r} must be an integer")
        return int(number)
    if kind is float:
        number = _as_number(value)
        if number is None:
            raise ValueError(f"{key}={value!r} must be a number")
        return number
    return str(value)


def apply_overrides(config: ExperimentConfig, values: Dict[str, Any]) -> ExperimentConfig:
    """Return a copy with `values` applied; unknown keys are rejected."""
    known = _field_types()
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
    return config.with_updates(**{k: _coerce(k, v) for k, v in values.items()})


def parse_assignments(lines: Iterable[str]) -> Dict[str, Any]:
    """Parse `key = value` (or `key=value`) lines into typed values."""
    values: Dict[str, Any] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {number}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"line {number}: missing key")
        values[key] = yaml.safe_load(value) if value else None
    return values


def load_config(path: Union[str, Path], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".yaml", ".yml"):
        values = yaml.safe_load(text) or {}
        if not isinstance(values, dict):
            raise ValueError(f"{path}: YAML config must be a mapping")
    else:
        values = parse_assignments(text.splitlines())
    logger.debug("loaded %d keys from %s", len(values), path)
    return apply_overrides(base or ExperimentConfig(), values)
