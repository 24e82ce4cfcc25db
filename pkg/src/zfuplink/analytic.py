"""
Closed-form performance of the ZF uplink and their quadrature oracles.

The SINR law everything rests on: gamma = X / (theta + eta X) with
X ~ Gamma(M - K + 1, scale_x). Hence
- PDF/CDF/outage use theta_eff = theta / scale_x
- the ergodic rate is E[ln(1 + a x) - ln(1 + b x)] / ln 2 over x ~ Gamma(M - K + 1, 1)
- the SER comes from the MGF through Craig's angular integrals
- the large-M limits only involve the large-scale gains
"""

import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import mpmath
import numpy as np
from scipy import special

from .specfun import (
    DEFAULT_QUADRATURE,
    MPMATH_DPS,
    QuadratureSpec,
    exp_integral_ei,
    exp_integral_en,
    gamma_expectation,
    hyp_2f0,
    integrate,
    reg_lower_gamma,
)
from .system_model import (
    SUPPORTED_QAM_ORDERS,
    ArrayLike,
    FadingProfile,
    SinrParams,
    SystemConfig,
    pilot_beta_hat,
)

logger = logging.getLogger(__name__)

LOG2E = 1.0 / math.log(2.0)
RATE_CLOSED_MAX_ORDER = 20
MGF_METHODS = ("law", "closed", "quadrature")
SER_BOUND_VARIANTS = ("step", "printed")
SER_QUADRATURE = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-9, max_subdivisions=200)


def _clamp(value: ArrayLike) -> ArrayLike:
    clipped = np.clip(value, 0.0, 1.0)
    return float(clipped) if np.ndim(clipped) == 0 else clipped


def _scalar_or_array(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# SINR distribution
# ---------------------------------------------------------------------------


def sinr_pdf(params: SinrParams, s: ArrayLike) -> ArrayLike:
    """
    Density of the ZF SINR.

    p(s) = theta_eff^n s^(n-1) / (1 - eta s)^(n+1) exp(-theta_eff s / (1 - eta s)) / (n-1)!
    with n = M - K + 1.

    Raises:
        ValueError: s outside [0, 1/eta)
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(s >= params.sinr_ceiling):
        raise ValueError(f"SINR outside the support [0, {params.sinr_ceiling})")
    n = params.shape
    slack = 1.0 - params.eta * s
    u = params.theta_eff * s / slack
    log_density = (
        n * math.log(params.theta_eff)
        + special.xlogy(n - 1, s)
        - (n + 1) * np.log(slack)
        - u
        - special.gammaln(n)
    )
    return _scalar_or_array(np.exp(log_density))


def sinr_cdf(params: SinrParams, s: ArrayLike) -> ArrayLike:
    """F(s) = P(M - K + 1, theta_eff s / (1 - eta s)) below 1/eta, 1 above."""
    return _cdf(params, s, params.theta_eff)


def sinr_cdf_bare_theta(params: SinrParams, s: ArrayLike) -> ArrayLike:
    """CDF with bare theta in the exponent, kept for the validation report."""
    return _cdf(params, s, params.theta)


def _cdf(params: SinrParams, s: ArrayLike, rate: float) -> ArrayLike:
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("SINR must be nonnegative")
    inside = s < params.sinr_ceiling
    slack = np.where(inside, 1.0 - params.eta * s, 1.0)
    u = np.where(inside, rate * s / slack, 0.0)
    values = np.where(inside, reg_lower_gamma(params.shape, u), 1.0)
    return _clamp(values)


def outage(params: SinrParams, gamma_th: ArrayLike) -> ArrayLike:
    """P(gamma < gamma_th)."""
    return sinr_cdf(params, gamma_th)


# ---------------------------------------------------------------------------
# Achievable rate
# ---------------------------------------------------------------------------


def closed_form_bracket(q: int, z: float) -> float:
    """
    One bracket of the closed-form rate sum at z = 1/a:

        (1/q!) [(-1)^(q-1) z^q e^z Ei(-z) + sum_{k=1}^{q} (k-1)! (-z)^(q-k)]

    The bracket equals e^z E_{q+1}(z), which is evaluated instead of the
    alternating sum so that large z does not cancel.
    """
    if q == 0:
        return -exp_integral_ei(-z, scaled=True)
    return exp_integral_en(q + 1, z, scaled=True)


def _log_moment(c: float, order: int) -> float:
    """E[ln(1 + c x)] for x ~ Gamma(order + 1, 1), in nats."""
    if c == 0.0:
        return 0.0
    z = 1.0 / c
    return math.fsum(closed_form_bracket(q, z) for q in range(order + 1))


def rate_closed(params: SinrParams) -> float:
    """
    Exact ergodic rate (bits/s/Hz) from the exponential-integral closed form.

    Orders M - K above RATE_CLOSED_MAX_ORDER are routed to rate_quadrature.
    """
    order = params.order
    if order > RATE_CLOSED_MAX_ORDER:
        logger.warning(
            "M-K=%d exceeds the closed-form cap %d, using quadrature",
            order,
            RATE_CLOSED_MAX_ORDER,
        )
        return rate_quadrature(params)
    return LOG2E * (_log_moment(params.a, order) - _log_moment(params.b, order))


def rate_quadrature(params: SinrParams, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """
    Ergodic rate by quadrature over the Gamma law of x = X / scale_x.

    ln(1 + a x) - ln(1 + b x) is integrated as log1p((a - b) x / (1 + b x)).
    """
    gap = params.a - params.b
    b = params.b

    def integrand(x: float) -> float:
        return math.log1p(gap * x / (1.0 + b * x))

    return LOG2E * gamma_expectation(integrand, params.shape, spec)


def ergodic_rate(params: SinrParams) -> float:
    if params.order <= RATE_CLOSED_MAX_ORDER:
        return rate_closed(params)
    return rate_quadrature(params)


def spectral_efficiency(cfg: SystemConfig, rates: Sequence[float]) -> float:
    """Per-cell spectral efficiency ((T - tau_u)/T) * sum_k R_k."""
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (cfg.K,):
        raise ValueError(f"expected {cfg.K} per-user rates, got shape {rates.shape}")
    return float(cfg.data_fraction * rates.sum())


# ---------------------------------------------------------------------------
# MGF and symbol error rate
# ---------------------------------------------------------------------------


def mgf(params: SinrParams, s: float) -> float:
    """
    Closed-form MGF through 2F0.

    Phi(s) = sum_p C(n, p) (-w)^p 2F0(n, p; ; -kappa_eff / (theta + c))
    with c = s * scale_x and w = c / (theta + c). The sum alternates, so it
    is carried out at extended precision.
    """
    if s < 0:
        raise ValueError(f"MGF argument s={s} must be nonnegative")
    if s == 0:
        return 1.0
    n = params.shape
    with mpmath.workdps(MPMATH_DPS):
        c = mpmath.mpf(s) * params.scale_x
        base = params.theta + c
        w = c / base
        z = -mpmath.mpf(params.kappa_eff) / base
        total = mpmath.fsum(
            mpmath.binomial(n, p) * (-w) ** p * hyp_2f0(n, p, z, as_mpf=True)
            for p in range(n + 1)
        )
        return _clamp(float(total))


def pilot_kappa(params: SinrParams, pilot_power: float) -> float:
    """kappa = (tau P beta_hat + 1) / (tau P beta_hat), from the pilot power."""
    product = pilot_power * params.beta_hat
    return (product + 1.0) / product


def mgf_quadrature(
    params: SinrParams,
    s: float,
    kappa: Optional[float] = None,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> float:
    """
    MGF oracle: E_Y[(Y / (Y + s scale_x))^n] with Y - theta ~ Gamma(n, kappa).

    `kappa` defaults to kappa_eff.
    """
    if s < 0:
        raise ValueError(f"MGF argument s={s} must be nonnegative")
    kappa = params.kappa_eff if kappa is None else kappa
    n = params.shape
    c = s * params.scale_x
    theta = params.theta
    if kappa == 0.0:
        return _clamp((theta / (theta + c)) ** n)

    def conditional(t: float) -> float:
        return (1.0 + c / (theta + kappa * t)) ** (-n)

    return _clamp(gamma_expectation(conditional, n, spec))


def mgf_sinr_law(params: SinrParams, s: float, spec: QuadratureSpec = SER_QUADRATURE) -> float:
    """MGF E[exp(-s gamma)] taken directly over X ~ Gamma(n, scale_x)."""
    if s < 0:
        raise ValueError(f"MGF argument s={s} must be nonnegative")
    if s == 0:
        return 1.0
    n = params.shape
    theta, eta, scale = params.theta, params.eta, params.scale_x

    def integrand(x: float) -> float:
        X = scale * x
        return math.exp(-s * X / (theta + eta * X))

    # large s squeezes the mass towards x = 0; give quadrature the new peak
    width = 1.0 / (1.0 + s * scale / theta)
    peak = (n - 1) * width
    points = (peak, peak + 10.0 * math.sqrt(n) * width)
    return _clamp(gamma_expectation(integrand, n, spec, points=points))


def _mgf_function(params: SinrParams, method: str) -> Callable[[float], float]:
    if method == "law":
        return lambda s: mgf_sinr_law(params, s)
    if method == "closed":
        return lambda s: mgf(params, s)
    if method == "quadrature":
        return lambda s: mgf_quadrature(params, s, spec=SER_QUADRATURE)
    raise ValueError(f"unknown MGF method {method!r}, expected one of {MGF_METHODS}")


def _qam_constants(qam_order: int) -> Tuple[float, float]:
    if qam_order not in SUPPORTED_QAM_ORDERS:
        raise ValueError(f"QAM order {qam_order} not supported")
    q = 1.0 - 1.0 / math.sqrt(qam_order)
    g = 3.0 / (2.0 * (qam_order - 1))
    return q, g


def ser_exact(params: SinrParams, qam_order: int, mgf_method: str = "law") -> float:
    """
    Average square-QAM SER.

    (4q/pi) [int_0^{pi/2} Phi(g / sin^2 phi) dphi - q int_0^{pi/4} Phi(g / sin^2 phi) dphi]
    with q = 1 - 1/sqrt(order) and g = 3 / (2 (order - 1)).
    """
    q, g = _qam_constants(qam_order)
    phi = _mgf_function(params, mgf_method)

    def integrand(angle: float) -> float:
        sin_sq = math.sin(angle) ** 2
        return phi(g / sin_sq) if sin_sq > 0 else 0.0

    full = integrate(integrand, 0.0, math.pi / 2.0, SER_QUADRATURE)
    quarter = integrate(integrand, 0.0, math.pi / 4.0, SER_QUADRATURE)
    return _clamp(4.0 * q / math.pi * (full - q * quarter))


def ser_upper_coefficients(qam_order: int, variant: str = "step") -> Tuple[float, float, float]:
    """
    Weights of Phi(g), Phi(4g/3), Phi(2g) in the SER bound.

    "step": Craig's integrands increase in phi, so bounding them by their
    value at the right end of [0, pi/4], [pi/4, pi/3] and [pi/3, pi/2] gives
    P_s <= q(1-q) e^{-2g gamma} + (q/3) e^{-4g gamma/3} + (2q/3) e^{-g gamma}.

    "printed": (5/(3 r) - 1/M - 2/3, 1 - 1/r, 2/r - 1 - 1/M) with r = sqrt(M).
    These can be negative and do not bound the SER; they are evaluated for
    the validation report only.
    """
    if variant not in SER_BOUND_VARIANTS:
        raise ValueError(f"unknown SER bound variant {variant!r}, expected one of {SER_BOUND_VARIANTS}")
    q, _ = _qam_constants(qam_order)
    if variant == "printed":
        root = math.sqrt(qam_order)
        return (
            5.0 / (3.0 * root) - 1.0 / qam_order - 2.0 / 3.0,
            1.0 - 1.0 / root,
            2.0 / root - 1.0 - 1.0 / qam_order,
        )
    return 2.0 * q / 3.0, q / 3.0, q * (1.0 - q)


def ser_upper(
    params: SinrParams, qam_order: int, mgf_method: str = "law", variant: str = "step"
) -> float:
    """
    Three-term MGF upper bound on the average SER.

    The "printed" variant is returned unclamped so negative values stay visible.
    """
    _, g = _qam_constants(qam_order)
    c1, c2, c3 = ser_upper_coefficients(qam_order, variant)
    phi = _mgf_function(params, mgf_method)
    value = c1 * phi(g) + c2 * phi(4.0 * g / 3.0) + c3 * phi(2.0 * g)
    return float(value) if variant == "printed" else _clamp(value)


# ---------------------------------------------------------------------------
# Large-M regimes
# ---------------------------------------------------------------------------


def asymptotic_sinr(profile: FadingProfile, cell: int, user: int) -> float:
    """beta_ll^2 / sum_{j != l} beta_jl^2; inf without interferers."""
    column = profile.column(cell, user)
    interference = float(np.sum(np.delete(column, cell) ** 2))
    if interference == 0.0:
        return math.inf
    return float(column[cell] ** 2 / interference)


def fixed_ratio_sinr(
    cfg: SystemConfig,
    profile: FadingProfile,
    cell: int,
    user: int,
    mu: float,
    alpha: Sequence[float],
) -> float:
    """
    Deterministic SINR when M and K grow with M/K = mu fixed.

    beta^2 (mu - 1) / (beta^2 beta_hat sum(alpha) / K + sum_{i != l} beta_il^2 (mu - 1))
    with K and beta_hat taken from `cfg` and `profile`.
    """
    if mu <= 1:
        raise ValueError(f"mu={mu} must exceed 1")
    profile.check_against(cfg)
    K = cfg.K
    beta_hat = float(pilot_beta_hat(cfg, profile, cell)[user])
    column = profile.column(cell, user)
    desired_sq = column[cell] ** 2
    interference = float(np.sum(np.delete(column, cell) ** 2))
    numerator = desired_sq * (mu - 1.0)
    denominator = desired_sq * beta_hat * float(np.sum(alpha)) / K + interference * (mu - 1.0)
    if denominator == 0.0:
        return math.inf
    return float(numerator / denominator)


def power_scaled_sinr(
    profile: FadingProfile, cell: int, user: int, E_u: float, tau_u: int, M: int
) -> float:
    """SINR limit with P_u = E_u / M: tau E^2 beta^2 / (tau E^2 sum_{i != l} beta^2 + M)."""
    if E_u <= 0:
        raise ValueError(f"E_u={E_u} must be positive")
    if M < 1:
        raise ValueError(f"M={M} must be >= 1")
    column = profile.column(cell, user)
    interference = float(np.sum(np.delete(column, cell) ** 2))
    weight = tau_u * E_u**2
    return float(weight * column[cell] ** 2 / (weight * interference + M))


def deterministic_sinr(params: SinrParams) -> float:
    """gamma evaluated at E[X] = (M - K + 1) scale_x."""
    return float(params.sinr_of(params.shape * params.scale_x))


def asymptotic_spectral_efficiency(cfg: SystemConfig, profile: FadingProfile, cell: int) -> float:
    """Spectral efficiency with every user at its M -> inf SINR."""
    rates = [math.log2(1.0 + asymptotic_sinr(profile, cell, k)) for k in range(cfg.K)]
    return spectral_efficiency(cfg, rates)
