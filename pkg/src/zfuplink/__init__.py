"""
zfuplink: ZF detection in the pilot-contaminated multicell uplink

Layers, bottom-up:
- system_model: configuration, large-scale gains, per-user SINR constants
- specfun: exponential integrals, incomplete gamma, 2F0, quadrature
- channel: Rayleigh draws, pilot phase, MMSE estimation
- receiver / modulation: ZF receiver, instantaneous SINR, Gray-coded QAM
- analytic: SINR law, outage, ergodic rate, MGF, SER, large-M limits
- montecarlo: seeded trials and their statistics
"""

from .system_model import (
    SystemConfig,
    FadingProfile,
    SinrParams,
    validate_config,
    fixed_cross_gain_profile,
    hexagonal_profile,
    derive_sinr_params,
    derive_cell_params,
    pilot_beta_hat,
    db_to_linear,
    linear_to_db,
)
from .specfun import QuadratureError, QuadratureSpec, exp_integral_ei, hyp_2f0, reg_lower_gamma
from .channel import (
    ChannelRealization,
    EstimationResult,
    draw_channels,
    pilot_observation,
    mmse_estimate,
    estimation_error_traces,
    normalized_error_db,
)
from .receiver import RankDeficientChannelError, ZfReceiver, build_zf, detect, instantaneous_sinr
from .modulation import qam_constellation, qam_map, qam_demap, qam_slice
from .analytic import (
    sinr_pdf,
    sinr_cdf,
    outage,
    rate_closed,
    rate_quadrature,
    ergodic_rate,
    mgf,
    mgf_quadrature,
    ser_exact,
    ser_upper,
    asymptotic_sinr,
    fixed_ratio_sinr,
    power_scaled_sinr,
    spectral_efficiency,
)
from .montecarlo import (
    TrialPlan,
    AggregateStats,
    run_sinr_trials,
    run_ser_trials,
    ks_statistic,
    binomial_ci,
    trial_rng,
)

__all__ = [
    # system model
    'SystemConfig',
    'FadingProfile',
    'SinrParams',
    'validate_config',
    'fixed_cross_gain_profile',
    'hexagonal_profile',
    'derive_sinr_params',
    'derive_cell_params',
    'pilot_beta_hat',
    'db_to_linear',
    'linear_to_db',

    # special functions
    'QuadratureError',
    'QuadratureSpec',
    'exp_integral_ei',
    'hyp_2f0',
    'reg_lower_gamma',

    # channel and detection
    'ChannelRealization',
    'EstimationResult',
    'draw_channels',
    'pilot_observation',
    'mmse_estimate',
    'estimation_error_traces',
    'normalized_error_db',
    'RankDeficientChannelError',
    'ZfReceiver',
    'build_zf',
    'detect',
    'instantaneous_sinr',
    'qam_constellation',
    'qam_map',
    'qam_demap',
    'qam_slice',

    # closed forms
    'sinr_pdf',
    'sinr_cdf',
    'outage',
    'rate_closed',
    'rate_quadrature',
    'ergodic_rate',
    'mgf',
    'mgf_quadrature',
    'ser_exact',
    'ser_upper',
    'asymptotic_sinr',
    'fixed_ratio_sinr',
    'power_scaled_sinr',
    'spectral_efficiency',

    # Monte Carlo
    'TrialPlan',
    'AggregateStats',
    'run_sinr_trials',
    'run_ser_trials',
    'ks_statistic',
    'binomial_ci',
    'trial_rng',
]
