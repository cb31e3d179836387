"""
Drift - the one-step drift Dg = Pg - g of a Lyapunov function g.

Dg is integrated over the innovation alpha, not over the next state. The
integrand g(next)^p - g(x)^p is evaluated in an incremental form so that the
small drift of a large g(x) is not lost to cancellation. Panel boundaries sit
at every kink of alpha -> g((x -+ x^gamma + alpha)^+)^p: the reflection point,
the clip point of a clipped g, and the body/tail breakpoints of the law.
"""

import csv
import json
import math
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .chain import Drift, ModelSpec
from .dist import Innovation, InnovationSpec, PointMass, cdf, density, mass
from .errors import DivergenceError, DomainError
from .quadrature import integrate, integrate_to_infinity
from .specialfn import k_const, l_const

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "# heavytail drift-report v1"
GRID_NOTE = "numerical certificate on the listed grid only; not a proof for all x"
DRIFT_REL_TOL = 1e-9
ASYMPTOTIC_FLOOR = 10.0


class ConditionKind(str, Enum):
    """Foster-Lyapunov criteria that check_condition can certify on a grid."""
    T2_1_RECURRENCE = "T2_1_RECURRENCE"
    T2_1_TRANSIENCE = "T2_1_TRANSIENCE"
    T2_2_MOMENT_UPPER = "T2_2_MOMENT_UPPER"
    T2_2_MOMENT_LOWER = "T2_2_MOMENT_LOWER"


@dataclass(frozen=True)
class Condition:
    """
    A drift criterion with its parameters.

    MOMENT_UPPER: Dg^p <= -c g^(p-2).
    MOMENT_LOWER: Dg >= -c1, Dg^r <= c2 g^(r-1) and Dg^p >= 0.
    Constants left as None are reported as the best values found on the grid.
    """
    kind: ConditionKind
    p: float = 1.0
    c: Optional[float] = None
    r: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ConditionKind(self.kind))
        if self.p <= 0:
            raise DomainError(f"power p must be positive, got {self.p}")
        if self.kind == ConditionKind.T2_2_MOMENT_LOWER and (self.r is None or self.r <= 0):
            raise DomainError("MOMENT_LOWER needs a positive r")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "p": self.p, "c": self.c, "r": self.r, "c1": self.c1, "c2": self.c2}


@dataclass(frozen=True)
class LyapunovSpec:
    """g(x) = x^delta; with delta < 0 the function is clipped to 1 below x = 1."""
    delta: float
    clipped: bool = False

    def __post_init__(self):
        if self.delta == 0:
            raise DomainError("Lyapunov exponent delta must be nonzero")
        if self.delta < 0 and not self.clipped:
            raise DomainError("negative delta requires clipped=True to keep g bounded")

    def value(self, x):
        x_arr = np.asarray(x, dtype=np.float64)
        if self.delta > 0:
            out = np.maximum(x_arr, 0.0) ** self.delta
        else:
            out = np.where(x_arr >= 1.0, np.maximum(x_arr, 1.0) ** self.delta, 1.0)
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> Dict[str, Any]:
        return {"delta": self.delta, "clipped": self.clipped}


@dataclass
class DriftEstimate:
    """Dg^p at one point with its quadrature error and per-segment pieces."""
    value: float
    error: float
    atom: float
    segments: List[Tuple[float, float, float]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "error": self.error, "atom": self.atom}


@dataclass
class DriftAsymptotic:
    """Leading-order drift with the band from the tail-constant bounds."""
    value: float
    lower: float
    upper: float

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "lower": self.lower, "upper": self.upper}


@dataclass
class PartitionTerms:
    """The four cell contributions E[(g(next) - g(x)); alpha in A_i]."""
    terms: Tuple[float, float, float, float]
    x: float
    beta: float

    @property
    def total(self) -> float:
        return float(sum(self.terms))

    def to_dict(self) -> Dict[str, Any]:
        return {"x": self.x, "beta": self.beta, "terms": list(self.terms), "total": self.total}


def _relevant_theta(dist: InnovationSpec) -> Optional[float]:
    p = dist.params("right")
    return None if p is None else p[0]


def _check_integrable(dist: Innovation, lyap: LyapunovSpec, p: float) -> None:
    if isinstance(dist, PointMass):
        return
    theta = _relevant_theta(dist)
    q = p * lyap.delta
    if theta is not None and q > 0 and q >= theta:
        raise DivergenceError(f"E[g(next)^p] is infinite: p*delta={q} >= theta={theta}")


def _increment(lyap: LyapunovSpec, p: float, x: float, gxp: float, d: np.ndarray) -> np.ndarray:
    # g(x + d)^p - g(x)^p, with x + d reflected at 0
    q = p * lyap.delta
    nxt = np.maximum(x + d, 0.0)
    rel = np.where(nxt > 0, d / x, 0.0)
    stable = gxp * np.expm1(q * np.log1p(np.maximum(rel, -1.0 + 1e-300)))
    if lyap.delta > 0:
        return np.where(nxt > 0, stable, -gxp)
    direct = np.where(nxt >= 1.0, np.maximum(nxt, 1.0) ** q, 1.0) - gxp
    return np.where((nxt >= 1.0) & (x >= 1.0), stable, direct)


def _decades(lo: float, hi: float) -> List[float]:
    if lo <= 0 or hi <= lo * 10:
        return []
    k_lo = math.ceil(math.log10(lo)) + 1
    k_hi = math.floor(math.log10(hi))
    return [10.0 ** k for k in range(k_lo, k_hi + 1) if lo < 10.0 ** k < hi]


def drift_estimate(
    model: ModelSpec,
    dist: Innovation,
    lyap: LyapunovSpec,
    p: float,
    x: float,
    extra_breakpoints: Sequence[float] = (),
    rel_tol: float = DRIFT_REL_TOL,
) -> DriftEstimate:
    """
    Dg^p(x) = E[g(next)^p] - g(x)^p with error estimate and segment values.

    Args:
        model: Chain model.
        dist: Innovation law.
        lyap: Lyapunov function.
        p: Power applied to g.
        x: State, x > 0.
        extra_breakpoints: Additional alpha values forced as panel ends.
        rel_tol: Relative tolerance per segment.

    Raises:
        DivergenceError: If p * delta >= theta of the upward tail.
        NumericalError: If a segment quadrature fails.
    """
    if x <= 0:
        raise DomainError(f"drift needs x > 0, got {x}")
    if p <= 0:
        raise DomainError(f"power p must be positive, got {p}")
    _check_integrable(dist, lyap, p)

    gxp = float(lyap.value(x)) ** p
    g0p = float(lyap.value(0.0)) ** p
    shift = model.sign * x ** model.gamma
    s = x + shift

    if isinstance(dist, PointMass):
        value = float(_increment(lyap, p, x, gxp, np.asarray(shift + dist.value)))
        return DriftEstimate(value, 0.0, value if x + shift + dist.value <= 0 else 0.0, [])

    lo_support = -math.inf if dist.params("left") else 0.0
    hi_support = math.inf if dist.params("right") else 0.0
    atom_mass = float(cdf(dist, -s)) if -s > lo_support else 0.0
    atom = (g0p - gxp) * atom_mass
    lower = max(lo_support, -s)

    candidates = {-dist.y0, 0.0, dist.y0, s, -s, *extra_breakpoints}
    if lyap.delta < 0:
        candidates.add(1.0 - s)
    reach = max(abs(s), dist.y0)
    candidates.update(_decades(dist.y0, reach))
    candidates.update(-b for b in _decades(dist.y0, reach))
    finite_hi = hi_support if math.isfinite(hi_support) else None
    points = sorted(b for b in candidates if lower < b < (finite_hi if finite_hi is not None else math.inf))
    points = [lower] + points
    if finite_hi is not None:
        points.append(finite_hi)

    def integrand(alpha: np.ndarray) -> np.ndarray:
        return _increment(lyap, p, x, gxp, shift + alpha) * density(dist, alpha)

    abs_tol = 1e-15 * max(gxp, 1.0)
    segments = []
    error = 0.0
    if lower < hi_support:
        for a, b in zip(points[:-1], points[1:]):
            res = integrate(integrand, a, b, rel_tol=rel_tol, abs_tol=abs_tol)
            segments.append((a, b, res.value))
            error += res.error
        if finite_hi is None:
            theta = _relevant_theta(dist)
            kappa = theta - max(p * lyap.delta, 0.0)
            start = points[-1]
            res = integrate_to_infinity(integrand, start, kappa, rel_tol=rel_tol, abs_tol=abs_tol)
            segments.append((start, math.inf, res.value))
            error += res.error

    value = atom + math.fsum(v for _, _, v in segments)
    logger.debug(f"Dg^{p}({x:.4g}) = {value:.6e} from {len(segments)} segments")
    return DriftEstimate(value, error, atom, segments)


def drift_quadrature(
    model: ModelSpec,
    dist: Innovation,
    lyap: LyapunovSpec,
    p: float,
    x: float,
    extra_breakpoints: Sequence[float] = (),
) -> float:
    """Dg^p(x) by quadrature over the innovation density (see drift_estimate)."""
    return drift_estimate(model, dist, lyap, p, x, extra_breakpoints).value


def drift_asymptotic(model: ModelSpec, dist: InnovationSpec, delta: float, x: float) -> DriftAsymptotic:
    """
    Leading-order Dg for g = x^delta at large x.

    Down drift with the upward tail (theta, c):
        -delta x^(delta+gamma-1) + delta c K(delta, theta) x^(delta-theta)
    Up drift with the opposing (downward) tail:
        c L(delta, theta) x^(delta-theta) + delta x^(delta+gamma-1)
    The band replaces c by the bounds b1, b2 of an oscillating tail constant.

    Raises:
        DomainError: If x < 10 y0, the needed tail is absent, or delta is
            outside the range of K (delta < theta) or L (delta >= 0).
    """
    if x < ASYMPTOTIC_FLOOR * dist.y0:
        raise DomainError(f"asymptotic drift needs x >= {ASYMPTOTIC_FLOOR} * y0, got x={x}")
    gamma = model.gamma
    drift_term = delta * x ** (delta + gamma - 1.0)
    if model.drift == Drift.DOWN:
        p = dist.params("right")
        if p is None:
            raise DomainError("down-drift asymptotics need an upward tail")
        theta, c = p
        jump = delta * k_const(delta, theta) * x ** (delta - theta)
        b1, b2 = dist.c_bounds("right")
        candidates = (-drift_term + b1 * jump, -drift_term + b2 * jump)
        return DriftAsymptotic(-drift_term + c * jump, min(candidates), max(candidates))
    p = dist.params("left")
    if p is None:
        raise DomainError("up-drift asymptotics need an opposing (downward) tail")
    theta, c = p
    jump = l_const(delta, theta) * x ** (delta - theta)
    b1, b2 = dist.c_bounds("left")
    candidates = (b1 * jump + drift_term, b2 * jump + drift_term)
    return DriftAsymptotic(c * jump + drift_term, min(candidates), max(candidates))


def partition_breakpoints(x: float, beta: float) -> Tuple[float, float, float]:
    xb = x ** beta
    return (-xb, 0.0, xb)


def partition_decomposition(
    model: ModelSpec,
    dist: Innovation,
    lyap: LyapunovSpec,
    x: float,
    beta: float,
) -> PartitionTerms:
    """
    Split Dg(x) over A1 = (-inf, -x^b), A2 = [-x^b, 0), A3 = [0, x^b), A4 = [x^b, inf).

    Uses the segments of drift_estimate with the cell ends as breakpoints, so
    the four terms sum to drift_quadrature(..., extra_breakpoints=
    partition_breakpoints(x, beta)) up to rounding.

    Raises:
        DomainError: If x <= 1 or beta is outside (0, 1).
    """
    if x <= 1:
        raise DomainError(f"partition needs x > 1, got {x}")
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    xb = x ** beta
    est = drift_estimate(model, dist, lyap, 1.0, x, partition_breakpoints(x, beta))

    def cell(a: float) -> int:
        if a < -xb:
            return 0
        if a < 0.0:
            return 1
        if a < xb:
            return 2
        return 3

    terms = [0.0, 0.0, 0.0, 0.0]
    if isinstance(dist, PointMass):
        terms[cell(dist.value)] = est.value
        return PartitionTerms(tuple(terms), x, beta)

    for a, b, value in est.segments:
        mid = a + 1.0 if math.isinf(b) else 0.5 * (a + b)
        terms[cell(mid)] += value

    if est.atom != 0.0:
        s = x + model.sign * x ** model.gamma
        gap = float(lyap.value(0.0)) - float(lyap.value(x))
        edges = (-math.inf, -xb, 0.0, xb, math.inf)
        for i in range(4):
            hi = min(edges[i + 1], -s)
            if hi > edges[i]:
                terms[i] += gap * mass(dist, edges[i], hi)
    return PartitionTerms(tuple(terms), x, beta)


def geometric_grid(lo: float = 1e2, hi: float = 1e6, per_decade: int = 64) -> np.ndarray:
    """Geometric grid with per_decade points per decade, both ends included."""
    if not 0 < lo < hi:
        raise DomainError(f"grid needs 0 < lo < hi, got [{lo}, {hi}]")
    count = int(round(math.log10(hi / lo) * per_decade)) + 1
    return np.geomspace(lo, hi, max(count, 2))


@dataclass
class DriftReport:
    """Grid evaluation of a drift criterion."""
    condition: Condition
    lyap: LyapunovSpec
    x_grid: List[float]
    dg_values: List[float]
    asymptotic_values: List[float]
    verdicts: List[bool]
    witness: Dict[str, Any] = field(default_factory=dict)
    power: float = 1.0
    note: str = GRID_NOTE

    @property
    def holds(self) -> bool:
        ok = bool(self.verdicts) and all(self.verdicts)
        if self.condition.kind == ConditionKind.T2_1_TRANSIENCE:
            ok = ok and self.witness.get("y") is not None
        return ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA.lstrip("# "),
            "condition": self.condition.to_dict(),
            "lyapunov": self.lyap.to_dict(),
            "power": self.power,
            "grid": {"lo": self.x_grid[0], "hi": self.x_grid[-1], "points": len(self.x_grid)},
            "holds": self.holds,
            "failures": int(sum(not v for v in self.verdicts)),
            "witness": self.witness,
            "note": self.note,
        }

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as handle:
            handle.write(REPORT_SCHEMA + "\n")
            writer = csv.writer(handle)
            writer.writerow(["x", "dg", "asymptotic", "verdict"])
            for x, dg, asym, ok in zip(self.x_grid, self.dg_values, self.asymptotic_values, self.verdicts):
                writer.writerow([repr(float(x)), repr(float(dg)), repr(float(asym)), int(ok)])
        return path

    def write_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, default=_json_default) + "\n")
        return path


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(f"not JSON serialisable: {type(value).__name__}")


def _safe_asymptotic(model: ModelSpec, dist: Innovation, delta: float, x: float) -> float:
    if not isinstance(dist, InnovationSpec):
        return math.nan
    try:
        return drift_asymptotic(model, dist, delta, x).value
    except DomainError:
        return math.nan


def check_condition(
    model: ModelSpec,
    dist: Innovation,
    lyap: LyapunovSpec,
    condition: Condition,
    x_grid: Sequence[float],
) -> DriftReport:
    """
    Evaluate a drift criterion at every grid point.

    Args:
        model: Chain model.
        dist: Innovation law.
        lyap: Lyapunov function g.
        condition: Criterion and its constants.
        x_grid: Strictly increasing points outside A.

    Returns:
        DriftReport with per-point verdicts and witness constants.

    Raises:
        DomainError: On a bad grid, or RECURRENCE with a bounded g.
        DivergenceError: If g^p is not integrable.
    """
    grid = [float(x) for x in x_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("x_grid must be nonempty and strictly increasing")
    if grid[0] <= model.target_a:
        raise DomainError(f"grid point {grid[0]} lies inside A = [0, {model.target_a}]")
    kind = condition.kind
    if kind == ConditionKind.T2_1_RECURRENCE and lyap.delta < 0:
        raise DomainError("the recurrence criterion needs g -> infinity (delta > 0)")

    power = condition.p if kind in (ConditionKind.T2_2_MOMENT_UPPER,) else 1.0
    dg = [drift_quadrature(model, dist, lyap, power, x) for x in grid]
    asym = [_safe_asymptotic(model, dist, lyap.delta, x) if power == 1.0 else math.nan for x in grid]
    g = [float(lyap.value(x)) for x in grid]
    witness: Dict[str, Any] = {}

    if kind == ConditionKind.T2_1_RECURRENCE:
        verdicts = [v <= 0.0 for v in dg]
        witness["max_dg"] = max(dg)
    elif kind == ConditionKind.T2_1_TRANSIENCE:
        verdicts = [v <= 0.0 for v in dg]
        a = model.target_a
        inf_a = min(float(lyap.value(0.0)), float(lyap.value(max(a, 0.0))), float(lyap.value(min(a, 1.0))))
        witness["inf_g_on_A"] = inf_a
        witness["y"] = next((x for x, gx in zip(grid, g) if gx < inf_a), None)
        witness["max_dg"] = max(dg)
    elif kind == ConditionKind.T2_2_MOMENT_UPPER:
        ratios = [-v / gx ** (power - 2.0) for v, gx in zip(dg, g)]
        c_found = min(ratios)
        c_used = condition.c if condition.c is not None else c_found
        verdicts = [v <= -c_used * gx ** (power - 2.0) for v, gx in zip(dg, g)]
        if condition.c is None:
            verdicts = [ok and c_found > 0 for ok in verdicts]
        witness["c"] = c_found
    else:
        r = condition.r
        dgr = [drift_quadrature(model, dist, lyap, r, x) for x in grid]
        dgp = [drift_quadrature(model, dist, lyap, condition.p, x) for x in grid]
        c1_found = max(0.0, max(-v for v in dg))
        c2_found = max(v / gx ** (r - 1.0) for v, gx in zip(dgr, g))
        c1 = condition.c1 if condition.c1 is not None else c1_found
        c2 = condition.c2 if condition.c2 is not None else c2_found
        verdicts = [
            (v >= -c1) and (vr <= c2 * gx ** (r - 1.0)) and (vp >= 0.0)
            for v, vr, vp, gx in zip(dg, dgr, dgp, g)
        ]
        witness.update({"c1": c1_found, "c2": c2_found, "min_dg_p": min(dgp)})

    report = DriftReport(condition, lyap, grid, dg, asym, verdicts, witness, power)
    logger.info(
        f"{kind.value} with delta={lyap.delta}: {sum(verdicts)}/{len(verdicts)} grid points pass"
    )
    return report
