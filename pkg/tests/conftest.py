"""Shared fixtures: the symmetric 7-cell scenario with cross gain 0.05."""

import pytest

from src.zfuplink.channel import estimation_error_traces
from src.zfuplink.system_model import (
    SystemConfig,
    derive_sinr_params,
    fixed_cross_gain_profile,
)


def make_config(**overrides) -> SystemConfig:
    values = dict(L=7, K=10, M=50, tau_u=10, T=196, qam_order=4)
    snr_db = overrides.pop("snr_db", 10.0)
    values.update(overrides)
    return SystemConfig.from_snr_db(snr_db, **values)


def make_params(cross_gain=0.05, include_noise=False, **overrides):
    cfg = make_config(**overrides)
    profile = fixed_cross_gain_profile(cfg, cross_gain)
    alpha = estimation_error_traces(cfg, profile, 0, include_noise)
    return derive_sinr_params(cfg, profile, 0, 0, alpha)


@pytest.fixture
def cfg():
    return make_config()


@pytest.fixture
def profile(cfg):
    return fixed_cross_gain_profile(cfg, 0.05)


@pytest.fixture
def params():
    return make_params()
