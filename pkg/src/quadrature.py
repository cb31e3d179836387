"""
Quadrature - Adaptive Gauss-Kronrod (7/15) integration on numpy panels.

All panels of a refinement round are evaluated in one vectorised call, so the
integrand must accept and return numpy arrays. Endpoint power singularities
and infinite ranges are handled by the change-of-variable helpers at the end
of the module, which turn them into bounded integrands on (0, 1].
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Any

import numpy as np

from .errors import NumericalError

logger = logging.getLogger(__name__)

Integrand = Callable[[np.ndarray], np.ndarray]

REL_TOL = 1e-10
ABS_TOL = 1e-14
MAX_PANELS = 10_000

# Kronrod abscissae on [0, 1], largest first; odd entries are the Gauss nodes.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])


def _full_rule():
    nodes = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
    wk = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
    wg = np.zeros(15)
    for i in range(15):
        j = i if i < 7 else 14 - i
        if j % 2 == 1 or j == 7:
            wg[i] = _WG[j // 2]
    return nodes, wk, wg


NODES, WEIGHTS_K, WEIGHTS_G = _full_rule()


@dataclass
class QuadResult:
    """Result of an adaptive integration."""
    value: float
    error: float
    panels: int

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "error": self.error, "panels": self.panels}


def gauss_kronrod(f: Integrand, a: np.ndarray, b: np.ndarray):
    """
    Apply the 15-point Kronrod rule and its embedded 7-point Gauss rule.

    Args:
        f: Vectorised integrand.
        a: Left panel ends, shape (m,).
        b: Right panel ends, shape (m,).

    Returns:
        (kronrod, error) arrays of shape (m,), error = |K - G|.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(x), dtype=np.float64)
    if not np.all(np.isfinite(fx)):
        bad = x[~np.isfinite(fx)][0]
        raise NumericalError(f"integrand is not finite at {bad!r}")
    kronrod = half * (fx @ WEIGHTS_K)
    gauss = half * (fx @ WEIGHTS_G)
    return kronrod, np.abs(kronrod - gauss)


def integrate(
    f: Integrand,
    a: float,
    b: float,
    rel_tol: float = REL_TOL,
    abs_tol: float = ABS_TOL,
    max_panels: int = MAX_PANELS,
    breakpoints: Iterable[float] = (),
) -> QuadResult:
    """
    Integrate f over the finite interval [a, b].

    Panels whose error exceeds the mean panel error are bisected each round
    until the summed error meets max(abs_tol, rel_tol * |value|).

    Args:
        f: Vectorised integrand, finite at interior points.
        a: Lower limit.
        b: Upper limit (b >= a).
        rel_tol: Relative tolerance.
        abs_tol: Absolute tolerance.
        max_panels: Panel cap; exceeding it raises NumericalError.
        breakpoints: Interior points that must be panel boundaries.

    Returns:
        QuadResult with value, error estimate and number of panels.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise NumericalError("integrate() needs finite limits; use integrate_to_infinity")
    if b == a:
        return QuadResult(0.0, 0.0, 0)
    if b < a:
        res = integrate(f, b, a, rel_tol, abs_tol, max_panels, breakpoints)
        return QuadResult(-res.value, res.error, res.panels)

    edges = sorted({float(a), float(b), *(float(p) for p in breakpoints if a < p < b)})
    lo = np.array(edges[:-1])
    hi = np.array(edges[1:])
    val, err = gauss_kronrod(f, lo, hi)
    done_val = 0.0
    done_err = 0.0
    n_done = 0

    while True:
        total = done_val + float(np.sum(val))
        total_err = done_err + float(np.sum(err))
        target = max(abs_tol, rel_tol * abs(total))
        if total_err <= target:
            return QuadResult(total, total_err, len(lo) + n_done)
        if len(lo) == 0:
            raise NumericalError("panels cannot be refined further", achieved=total_err / max(abs(total), 1e-300))

        width = hi - lo
        scale = np.maximum(np.abs(lo), np.abs(hi))
        splittable = width > 1e-14 * np.maximum(scale, 1e-300)
        # frozen panels keep their estimate but are never split again
        frozen = ~splittable
        if np.any(frozen):
            done_val += float(np.sum(val[frozen]))
            done_err += float(np.sum(err[frozen]))
            n_done += int(np.sum(frozen))
            lo, hi, val, err = lo[splittable], hi[splittable], val[splittable], err[splittable]
            continue

        split = err >= err.mean()
        n_panels = len(lo) + int(np.sum(split))
        if n_panels > max_panels:
            achieved = total_err / max(abs(total), 1e-300)
            raise NumericalError(
                f"quadrature on [{a}, {b}] exceeded {max_panels} panels", achieved=achieved
            )
        mids = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mids])
        new_hi = np.concatenate([mids, hi[split]])
        new_val, new_err = gauss_kronrod(f, new_lo, new_hi)
        keep = ~split
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        val = np.concatenate([val[keep], new_val])
        err = np.concatenate([err[keep], new_err])
        logger.debug(f"quadrature round: {len(lo)} panels, error {total_err:.3e}")


def integrate_singular_left(
    f: Integrand, a: float, b: float, rho: float, **kwargs
) -> QuadResult:
    """
    Integrate f on [a, b] where f(u) ~ (u - a)^(-rho) near a, 0 <= rho < 1.

    Uses u = a + (b - a) v^m with m = 1 / (1 - rho), which cancels the
    singular factor exactly.
    """
    if not 0.0 <= rho < 1.0:
        raise NumericalError(f"singularity exponent {rho} is not integrable")
    m = 1.0 / (1.0 - rho)
    span = b - a

    def mapped(v: np.ndarray) -> np.ndarray:
        return f(a + span * v ** m) * span * m * v ** (m - 1.0)

    return integrate(mapped, 0.0, 1.0, **kwargs)


def integrate_to_infinity(f: Integrand, a: float, kappa: float, **kwargs) -> QuadResult:
    """
    Integrate f on [a, inf) where f(u) decays like u^(-1-kappa), a > 0.

    Uses u = a v^(-1/kappa), mapping the tail onto (0, 1] with a bounded
    integrand.
    """
    if a <= 0:
        raise NumericalError("integrate_to_infinity needs a positive lower limit")
    if kappa <= 0:
        raise NumericalError(f"decay exponent {kappa} is not integrable")
    inv = 1.0 / kappa

    def mapped(v: np.ndarray) -> np.ndarray:
        u = a * v ** (-inv)
        out = f(u) * (a * inv) * v ** (-inv - 1.0)
        # u overflows only where the mapped integrand has already vanished
        return np.where(np.isfinite(u), out, 0.0)

    with np.errstate(over="ignore", invalid="ignore"):
        return integrate(mapped, 0.0, 1.0, **kwargs)
