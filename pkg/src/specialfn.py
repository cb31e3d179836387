"""
Special functions - log-Gamma and the critical constants K and L.

K(delta, theta) = Gamma(1-theta) Gamma(theta-delta) / (theta Gamma(1-delta))
controls the jump term of the down-drift chain, and
L(delta, theta) = Gamma(1+delta) Gamma(-theta) / Gamma(1-theta+delta)
controls the opposing-tail term of the up-drift chain. Each constant has an
integral representation, evaluated independently by quadrature and used as
an oracle for the Gamma-function formula.

Note on L: the denominator is Gamma(1 - theta + delta). A variant with
Gamma(1 - theta - delta) also circulates; it contradicts the Beta-integral
representation of L + 1/theta and is treated as a misprint.
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Tuple, Any

import numpy as np

from .errors import DomainError, NumericalError, SupercriticalError
from .quadrature import integrate

logger = logging.getLogger(__name__)

# Lanczos sum (exp(g)-scaled), N = 13, g below; rational form in descending powers.
LANCZOS_G = 6.024680040776729583740234375
_LANCZOS_NUM = (
    0.006061842346248906525783753964555936883222,
    0.5098416655656676188125178644804694509993,
    19.51992788247617482847860966235652136208,
    449.9445569063168119446858607650988409623,
    6955.999602515376140356310115515198987526,
    75999.29304014542649875303443598909137092,
    601859.6171681098786670226533699352302507,
    3481712.15498064590882071018964774556468,
    14605578.08768506808414169982791359218571,
    43338889.32467613834773723740590533316085,
    86363131.28813859145546927288977868422342,
    103794043.1163445451906271053616070238554,
    56906521.91347156388090791033559122686859,
)
_LANCZOS_DENOM = (
    1.0, 66.0, 1925.0, 32670.0, 357423.0, 2637558.0, 13339535.0,
    45995730.0, 105258076.0, 150917976.0, 120543840.0, 39916800.0, 0.0,
)

ROOT_RESIDUAL_TOL = 1e-9
ROOT_WIDTH_TOL = 1e-13
ROOT_MAX_ITER = 200
_CRITICAL_REL_TOL = 1e-12
_FAR_DELTA_FLOOR = 0.05


def _rational(x: float, num: Tuple[float, ...], denom: Tuple[float, ...]) -> float:
    # Horner in x, or in 1/x for |x| > 1 so large arguments cannot overflow
    if abs(x) > 1.0:
        y = 1.0 / x
        n = 0.0
        for c in reversed(num):
            n = n * y + c
        d = 0.0
        for c in reversed(denom):
            d = d * y + c
    else:
        n = 0.0
        for c in num:
            n = n * x + c
        d = 0.0
        for c in denom:
            d = d * x + c
    return n / d


def log_gamma(z: float) -> float:
    """
    Natural log of Gamma(z) for z > 0.

    Args:
        z: Positive real argument.

    Returns:
        ln Gamma(z).

    Raises:
        DomainError: If z <= 0 or is not finite.
    """
    z = float(z)
    if not math.isfinite(z) or z <= 0.0:
        raise DomainError(f"log_gamma is defined for finite z > 0, got {z}")
    if z == 1.0 or z == 2.0:
        return 0.0
    zgh = z + LANCZOS_G - 0.5
    return math.log(_rational(z, _LANCZOS_NUM, _LANCZOS_DENOM)) + (z - 0.5) * (math.log(zgh) - 1.0)


def _check_theta(theta: float) -> None:
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")


def k_const(delta: float, theta: float) -> float:
    """
    K(delta, theta) = Gamma(1-theta) Gamma(theta-delta) / (theta Gamma(1-delta)).

    All Gamma arguments are positive on the admissible range delta < theta < 1,
    so the value is positive and computed entirely in log space.

    Raises:
        DomainError: If theta is outside (0, 1) or delta >= theta.
    """
    _check_theta(theta)
    if delta >= theta:
        raise DomainError(f"k_const needs delta < theta, got delta={delta}, theta={theta}")
    log_k = log_gamma(1.0 - theta) + log_gamma(theta - delta) - log_gamma(1.0 - delta)
    return math.exp(log_k) / theta


def l_const(delta: float, theta: float) -> float:
    """
    L(delta, theta) = Gamma(1+delta) Gamma(-theta) / Gamma(1-theta+delta).

    Gamma(-theta) is taken as Gamma(1-theta)/(-theta), so L is always negative
    and L(0, theta) = -1/theta exactly.

    Raises:
        DomainError: If theta is outside (0, 1) or delta < 0.
    """
    _check_theta(theta)
    if delta < 0.0:
        raise DomainError(f"l_const needs delta >= 0, got {delta}")
    log_abs = log_gamma(1.0 + delta) + log_gamma(1.0 - theta) - log_gamma(1.0 - theta + delta)
    return -math.exp(log_abs) / theta


def abs_gamma_neg(theta: float) -> float:
    """|Gamma(-theta)| for theta in (0, 1)."""
    _check_theta(theta)
    return math.exp(log_gamma(1.0 - theta)) / theta


def _series_ratio(delta: float, u: np.ndarray) -> np.ndarray:
    # ((1+u)^delta - 1)/u, continuous at u = 0
    safe = np.where(u == 0.0, 1.0, u)
    ratio = np.expm1(delta * np.log1p(safe)) / safe
    return np.where(u == 0.0, delta, ratio)


def k_integral(delta: float, theta: float, rel_tol: float = 1e-10) -> float:
    """
    Quadrature of the integral of ((1+u)^delta - 1) u^(-1-theta) over (0, inf).

    Equals delta * K(delta, theta). The range is split at u = 1. On (0, 1]
    the substitution u = v^(1/(1-theta)) leaves the bounded integrand
    m * ((1+u)^delta - 1)/u. On [1, inf) the map u = 1/w followed by
    w = v^(1/kappa), kappa = theta - max(delta, 0), gives a bounded integrand
    on (0, 1].

    Raises:
        DomainError: On an inadmissible (delta, theta) or delta == 0.
        NumericalError: If the quadrature does not converge.
    """
    _check_theta(theta)
    if delta >= theta:
        raise DomainError(f"k_integral needs delta < theta, got delta={delta}, theta={theta}")
    if delta == 0.0:
        raise DomainError("k_integral needs delta != 0")

    m_near = 1.0 / (1.0 - theta)

    def near(v: np.ndarray) -> np.ndarray:
        return m_near * _series_ratio(delta, v ** m_near)

    kappa = theta - max(delta, 0.0)
    m_far = 1.0 / kappa

    if delta > 0.0:
        def far(v: np.ndarray) -> np.ndarray:
            w = v ** m_far
            return m_far * (np.exp(delta * np.log1p(w)) - v ** (m_far * theta - 1.0))
    else:
        def far(v: np.ndarray) -> np.ndarray:
            w = v ** m_far
            log_v = np.log(v)
            return m_far * (np.exp(delta * np.log1p(w) - (delta / theta) * log_v) - 1.0)

    inner = integrate(near, 0.0, 1.0, rel_tol=rel_tol)
    outer = integrate(far, 0.0, 1.0, rel_tol=rel_tol)
    logger.debug(f"k_integral({delta}, {theta}): panels {inner.panels}+{outer.panels}")
    return inner.value + outer.value


def l_integral(delta: float, theta: float, rel_tol: float = 1e-10) -> float:
    """
    Quadrature of the integral of ((1-u)^delta - 1) u^(-1-theta) over (0, 1).

    Equals L(delta, theta) + 1/theta. Split at 1/2; the u^(-theta)
    singularity at 0 is removed by u = v^(1/(1-theta))/2 and the
    (1-u)^delta cusp at 1 by 1 - u = v^m/2 with m = 1/clip(delta, 0.05, 1).
    Below delta = 0.05 the cusp is only logarithmic, and a larger m would
    pack the integrand into a spike at v = 1.
    """
    _check_theta(theta)
    if delta <= 0.0:
        raise DomainError(f"l_integral needs delta > 0, got {delta}")

    m_near = 1.0 / (1.0 - theta)
    scale = m_near * 2.0 ** (theta - 1.0)

    def near(v: np.ndarray) -> np.ndarray:
        u = 0.5 * v ** m_near
        # (1-u)^delta - 1 = -u * ratio(-u)
        return -scale * _series_ratio(delta, -u)

    m_far = 1.0 / min(max(delta, _FAR_DELTA_FLOOR), 1.0)

    def far(v: np.ndarray) -> np.ndarray:
        s = 0.5 * v ** m_far
        u = 1.0 - s
        with np.errstate(divide="ignore"):
            bracket = np.expm1(delta * np.log(s))
        return bracket * u ** (-1.0 - theta) * 0.5 * m_far * v ** (m_far - 1.0)

    first = integrate(near, 0.0, 1.0, rel_tol=rel_tol)
    second = integrate(far, 0.0, 1.0, rel_tol=rel_tol)
    return first.value + second.value


@dataclass
class CriticalRoot:
    """Root of a critical-case equation with its certificate."""
    delta0: float
    residual: float
    bracket: Tuple[float, float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "delta0": self.delta0,
            "residual": self.residual,
            "bracket": list(self.bracket),
        }


def bisect(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    ftol: float = ROOT_RESIDUAL_TOL,
    xtol: float = ROOT_WIDTH_TOL,
    max_iter: int = ROOT_MAX_ITER,
) -> CriticalRoot:
    """
    Bracketing bisection for a function with f(lo) < 0 < f(hi) (or reversed).

    Stops on |f(mid)| <= ftol or bracket width <= xtol.

    Raises:
        NumericalError: If the endpoints do not bracket a sign change or the
            residual is still above ftol when the loop ends.
    """
    f_lo = func(lo)
    f_hi = func(hi)
    if f_lo == 0.0:
        return CriticalRoot(lo, 0.0, (lo, hi))
    if f_hi == 0.0:
        return CriticalRoot(hi, 0.0, (lo, hi))
    if (f_lo > 0) == (f_hi > 0):
        raise NumericalError(f"no sign change on [{lo}, {hi}]: f={f_lo:.3e}, {f_hi:.3e}")

    best_x, best_f = (lo, f_lo) if abs(f_lo) < abs(f_hi) else (hi, f_hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = func(mid)
        if abs(f_mid) < abs(best_f):
            best_x, best_f = mid, f_mid
        if abs(f_mid) <= ftol:
            best_x, best_f = mid, f_mid
            break
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo <= xtol:
            break

    if abs(best_f) > ftol:
        raise NumericalError("bisection stalled above the residual tolerance", achieved=abs(best_f))
    return CriticalRoot(best_x, best_f, (lo, hi))


def is_supercritical_boundary(c: float, theta: float) -> bool:
    """True when c*pi*csc(pi*theta) equals theta up to rounding."""
    lhs = c * math.pi / math.sin(math.pi * theta)
    return abs(lhs - theta) <= _CRITICAL_REL_TOL * theta


def subcritical(c: float, theta: float) -> bool:
    """True when c*pi*csc(pi*theta) < theta strictly (outside the rounding band)."""
    lhs = c * math.pi / math.sin(math.pi * theta)
    return lhs < theta and not is_supercritical_boundary(c, theta)


def delta0_k(c: float, theta: float) -> CriticalRoot:
    """
    Unique root in (0, theta) of c*K(delta, theta) = 1.

    Args:
        c: Tail constant, c > 0.
        theta: Tail index in (0, 1).

    Returns:
        CriticalRoot with residual c*K - 1 at the root.

    Raises:
        SupercriticalError: If c*pi*csc(pi*theta) >= theta.
        NumericalError: If the upper bracket cannot be found.
    """
    _check_theta(theta)
    if c <= 0:
        raise DomainError(f"c must be positive, got {c}")
    if not subcritical(c, theta):
        raise SupercriticalError(c, theta)

    def h(delta: float) -> float:
        return c * k_const(delta, theta) - 1.0

    eps = 0.5 * theta
    hi = theta - eps
    for _ in range(ROOT_MAX_ITER):
        if h(hi) > 0:
            break
        eps *= 0.5
        hi = theta - eps
    else:
        raise NumericalError(f"delta0_k: no upper bracket below theta={theta}")
    root = bisect(h, 0.0, hi)
    logger.debug(f"delta0_k(c={c}, theta={theta}) = {root.delta0}")
    return root


def delta0_l(c: float, theta: float) -> CriticalRoot:
    """
    Unique root in (0, inf) of c*L(delta, theta) + delta = 0.

    The function starts at -c/theta and grows like delta - c|Gamma(-theta)|
    delta^theta, so the upper bracket starts at
    max(1, 2 (c |Gamma(-theta)|)^(1/(1-theta))) and doubles until positive.

    Raises:
        NumericalError: If the bracket passes delta = 1e6.
    """
    _check_theta(theta)
    if c <= 0:
        raise DomainError(f"c must be positive, got {c}")

    def h(delta: float) -> float:
        return c * l_const(delta, theta) + delta

    hi = max(1.0, 2.0 * (c * abs_gamma_neg(theta)) ** (1.0 / (1.0 - theta)))
    while h(hi) <= 0:
        hi *= 2.0
        if hi > 1e6:
            raise NumericalError(f"delta0_l: bracket expansion passed 1e6 for c={c}, theta={theta}")
    root = bisect(h, 0.0, hi)
    logger.debug(f"delta0_l(c={c}, theta={theta}) = {root.delta0}")
    return root
