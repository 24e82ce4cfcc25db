"""
Special functions and quadrature behind the closed-form expressions.

- exp_integral_ei / exp_integral_en: exponential integrals, optionally
  scaled by exp(|x|) so rate terms never form exp(1/b) for tiny b
- reg_lower_gamma: regularized lower incomplete gamma P(n, x)
- hyp_2f0: 2F0 through the Tricomi confluent function
- integrate / gamma_expectation: adaptive quadrature that fails loudly
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import mpmath
import numpy as np
from scipy import integrate as sp_integrate
from scipy import special

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
SERIES_SWITCH = 1.0
MPMATH_DPS = 50

_EPS = np.finfo(float).eps
_FPMIN = 1e-300
_MAX_ITER = 100_000
# scipy round-off diagnostics are accepted when the error estimate stays this
# close to the requested tolerance
_TOLERANCE_SLACK = 1e4

ArrayLike = Union[float, np.ndarray]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-11
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError(f"tolerances must be positive, got {self.abs_tol}, {self.rel_tol}")
        if self.max_subdivisions < 1:
            raise ValueError(f"max_subdivisions={self.max_subdivisions} must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()


def exp_integral_en(n: int, x: float, scaled: bool = False) -> float:
    """
    Generalized exponential integral E_n(x) = int_1^inf exp(-x t) t^-n dt.

    Power series for x <= 1, modified Lentz continued fraction above.

    Args:
        n: order, n >= 1
        x: argument, x >= 0 (x = 0 only for n >= 2)
        scaled: return exp(x) * E_n(x)

    Returns:
        E_n(x), or exp(x) * E_n(x) when scaled
    """
    if n < 1 or int(n) != n:
        raise ValueError(f"order n={n} must be an integer >= 1")
    if x < 0 or math.isnan(x):
        raise ValueError(f"E_n needs x >= 0, got {x}")
    n = int(n)
    nm1 = n - 1
    if x == 0.0:
        if nm1 == 0:
            raise ValueError("E_1 diverges at x = 0")
        return 1.0 / nm1
    if math.isinf(x):
        return 0.0

    if x > SERIES_SWITCH:
        b = x + n
        c = 1.0 / _FPMIN
        d = 1.0 / b
        h = d
        for i in range(1, _MAX_ITER):
            an = -i * (nm1 + i)
            b += 2.0
            d = 1.0 / (an * d + b)
            c = b + an / c
            delta = c * d
            h *= delta
            if abs(delta - 1.0) < _EPS:
                return h if scaled else h * math.exp(-x)
        raise ArithmeticError(f"continued fraction for E_{n}({x}) did not converge")

    ans = 1.0 / nm1 if nm1 else -math.log(x) - EULER_GAMMA
    fact = 1.0
    for i in range(1, _MAX_ITER):
        fact *= -x / i
        if i != nm1:
            delta = -fact / (i - nm1)
        else:
            psi = -EULER_GAMMA + math.fsum(1.0 / j for j in range(1, nm1 + 1))
            delta = fact * (-math.log(x) + psi)
        ans += delta
        if abs(delta) < abs(ans) * _EPS:
            return ans * math.exp(x) if scaled else ans
    raise ArithmeticError(f"series for E_{n}({x}) did not converge")


def exp_integral_ei(x: float, scaled: bool = False) -> float:
    """
    Exponential integral Ei(x) = -int_{-x}^inf exp(-t)/t dt on the negative axis.

    Args:
        x: argument, x < 0
        scaled: return exp(-x) * Ei(x)

    Raises:
        ValueError: x >= 0
    """
    if not x < 0:
        raise ValueError(f"exp_integral_ei supports x < 0 only, got {x}")
    return -exp_integral_en(1, -x, scaled=scaled)


def reg_lower_gamma(n: int, x: ArrayLike) -> ArrayLike:
    """P(n, x) = 1 - exp(-x) sum_{i<n} x^i / i!, clamped to [0, 1]."""
    if n < 1 or int(n) != n:
        raise ValueError(f"shape n={n} must be an integer >= 1")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("reg_lower_gamma needs x >= 0")
    value = np.clip(special.gammainc(n, x), 0.0, 1.0)
    return float(value) if value.ndim == 0 else value


def _is_nonpositive_int(value: float) -> bool:
    return value <= 0 and float(value).is_integer()


def hyp_2f0(p1: float, p2: float, z: float, as_mpf: bool = False):
    """
    Generalized hypergeometric 2F0(p1, p2; ; z).

    Terminating parameters use the finite sum; otherwise z < 0 goes through
    2F0(a, b; ; z) = (-z)^-a U(a, a - b + 1, -1/z).

    Args:
        p1, p2: parameters
        z: real argument
        as_mpf: return the mpmath value instead of a float

    Raises:
        ValueError: nonterminating series with z > 0
    """
    with mpmath.workdps(MPMATH_DPS):
        if z == 0 or p1 == 0 or p2 == 0:
            value = mpmath.mpf(1)
        elif _is_nonpositive_int(p1) or _is_nonpositive_int(p2):
            terms = int(min(-p for p in (p1, p2) if _is_nonpositive_int(p)))
            zz = mpmath.mpf(z)
            value = mpmath.fsum(
                mpmath.rf(p1, k) * mpmath.rf(p2, k) * zz**k / mpmath.factorial(k)
                for k in range(terms + 1)
            )
        elif z > 0:
            raise ValueError(f"2F0({p1}, {p2}; ; {z}) diverges for z > 0 unless it terminates")
        else:
            w = -mpmath.mpf(z)
            value = w ** (-p1) * mpmath.hyperu(p1, p1 - p2 + 1, 1 / w)
        return value if as_mpf else float(value)


def integrate(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    points: Optional[Sequence[float]] = None,
) -> float:
    """
    Adaptive Gauss-Kronrod quadrature of f over [lo, hi].

    `hi` may be +inf. Break points are only honoured on finite intervals.

    Raises:
        QuadratureError: tolerance not met within spec.max_subdivisions
    """
    if hi < lo:
        raise ValueError(f"integration bounds reversed: [{lo}, {hi}]")
    if lo == hi:
        return 0.0
    kwargs = dict(
        epsabs=spec.abs_tol,
        epsrel=spec.rel_tol,
        limit=spec.max_subdivisions,
        full_output=1,
    )
    if points is not None and math.isfinite(lo) and math.isfinite(hi):
        inner = sorted({float(p) for p in points if lo < p < hi})
        if inner:
            kwargs["points"] = inner
    result = sp_integrate.quad(f, lo, hi, **kwargs)
    value, abserr = float(result[0]), float(result[1])
    if not math.isfinite(value):
        raise QuadratureError(f"non-finite integral over [{lo}, {hi}]")
    if len(result) > 3:
        allowed = _TOLERANCE_SLACK * max(spec.abs_tol, spec.rel_tol * abs(value))
        if abserr > allowed:
            raise QuadratureError(
                f"integral over [{lo}, {hi}] did not converge: value={value:.6g} "
                f"error={abserr:.3g} ({result[3]})"
            )
        logger.debug("accepted quadrature diagnostic on [%s, %s]: %s", lo, hi, result[3])
    return value


def gamma_expectation(
    f: Callable[[float], float],
    shape: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    points: Sequence[float] = (),
) -> float:
    """
    E[f(X)] for X ~ Gamma(shape, 1).

    The density is applied in log space; the range is split where the Gamma
    mass is exhausted so the finite head can carry break points.
    """
    if shape <= 0:
        raise ValueError(f"shape={shape} must be positive")
    log_norm = float(special.gammaln(shape))
    power = shape - 1.0

    def weighted(x: float) -> float:
        if x <= 0.0:
            return f(0.0) * math.exp(-log_norm) if power == 0 else 0.0
        return f(x) * math.exp(power * math.log(x) - x - log_norm)

    split = shape + 12.0 * math.sqrt(shape) + 30.0
    head = integrate(weighted, 0.0, split, spec, points=[power, *points])
    tail = integrate(weighted, split, math.inf, spec)
    return head + tail
