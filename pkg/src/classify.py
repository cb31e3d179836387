"""
Classify - recurrence/transience phase diagram as a pure decision table.

Given the drift direction, the exponent gamma and the tails of the innovation
law, classify() returns the regime, the moment threshold q* of the passage
time and the clause of the result that decides it. lyapunov_recipe() returns
the Lyapunov function used to certify that verdict numerically.
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Tuple, Union

from .chain import Drift, ModelSpec
from .dist import CProfile, InnovationSpec, Side
from .drift import Condition, ConditionKind, LyapunovSpec
from .errors import DomainError
from .specialfn import delta0_k, delta0_l, is_supercritical_boundary, k_const, subcritical

logger = logging.getLogger(__name__)

CRITICAL_TOL = 1e-9


class Regime(str, Enum):
    RECURRENT = "RECURRENT"
    RECURRENT_CRITICAL = "RECURRENT_CRITICAL"
    TRANSIENT = "TRANSIENT"
    UNDECIDED = "UNDECIDED"


class QKind(str, Enum):
    """How q_star should be read."""
    VALUE = "VALUE"
    ALL = "ALL"
    NONE_KNOWN = "NONE_KNOWN"


QStar = Union[float, str]


@dataclass(frozen=True)
class Classification:
    """
    Verdict for one parameter point.

    q_star is a number when q_kind is VALUE, otherwise the string "ALL" (every
    moment is finite) or "NONE_KNOWN". sharp tells whether moments are known
    to be infinite above q_star; boundary_moment_known whether the moment at
    q = q_star itself is resolved.
    """
    regime: Regime
    q_kind: QKind
    q_value: Optional[float]
    delta0: Optional[float]
    clause: str
    sharp: bool
    boundary_moment_known: bool

    @property
    def q_star(self) -> QStar:
        if self.q_kind == QKind.VALUE:
            return self.q_value
        return self.q_kind.value

    def to_dict(self) -> Dict[str, Any]:
        return {
            "regime": self.regime.value,
            "q_star": self.q_star,
            "delta0": self.delta0,
            "clause": self.clause,
            "sharp": self.sharp,
            "boundary_moment_known": self.boundary_moment_known,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _verdict(regime: Regime, clause: str, q: QStar = "NONE_KNOWN", delta0: Optional[float] = None,
             sharp: bool = False, boundary: bool = False) -> Classification:
    if isinstance(q, str):
        return Classification(regime, QKind(q), None, delta0, clause, sharp, boundary)
    return Classification(regime, QKind.VALUE, float(q), delta0, clause, sharp, boundary)


def _undecided(clause: str) -> Classification:
    return _verdict(Regime.UNDECIDED, clause)


def _transient(clause: str) -> Classification:
    return _verdict(Regime.TRANSIENT, clause)


def _position(theta: float, gamma: float) -> int:
    """-1, 0 or 1 as theta is below, at or above the diagonal 1 - gamma."""
    gap = theta - (1.0 - gamma)
    if abs(gap) <= CRITICAL_TOL:
        return 0
    return 1 if gap > 0 else -1


def _down_one_sided(gamma: float, dist: InnovationSpec) -> Classification:
    theta, c = dist.params("right")
    pos = _position(theta, gamma)
    if pos > 0:
        return _verdict(Regime.RECURRENT, "Theorem 1.3 case 1(a)", theta / (1.0 - gamma),
                        sharp=True, boundary=True)
    if pos < 0:
        return _transient("Theorem 1.3 case 1(b)")
    if dist.c_profile == CProfile.OSCILLATING:
        return _undecided("Remark 1.5 (critical case with oscillating c_y)")
    if is_supercritical_boundary(c, theta):
        return _undecided("Theorem 1.3 case 2 (c*pi*csc(pi*theta) = theta)")
    if subcritical(c, theta):
        root = delta0_k(c, theta)
        return _verdict(Regime.RECURRENT_CRITICAL, "Theorem 1.3 case 2(a)", root.delta0 / (1.0 - gamma),
                        delta0=root.delta0, sharp=True, boundary=False)
    return _transient("Theorem 1.3 case 2(b)")


def _up_one_sided(gamma: float, dist: InnovationSpec) -> Classification:
    theta, c = dist.params("left")
    if dist.c_profile == CProfile.OSCILLATING:
        return _undecided("Theorem 1.4 needs c_y -> c")
    pos = _position(theta, gamma)
    if pos < 0:
        return _verdict(Regime.RECURRENT, "Theorem 1.4 part 1", "ALL", sharp=True, boundary=True)
    if pos > 0:
        return _transient("Theorem 1.4 part 3")
    root = delta0_l(c, theta)
    return _verdict(Regime.RECURRENT_CRITICAL, "Theorem 1.4 part 2", root.delta0 / theta,
                    delta0=root.delta0, sharp=True, boundary=False)


def _down_two_sided(gamma: float, dist: InnovationSpec) -> Classification:
    theta_r, theta_l = dist.theta_right, dist.theta_left
    pos = _position(theta_r, gamma)
    if pos > 0:
        return _verdict(Regime.RECURRENT, "Theorem 1.7 part 1", theta_r / (1.0 - gamma))
    if pos < 0 and theta_l > theta_r:
        return _transient("Theorem 1.7 part 2")
    return _undecided("outside Theorem 1.7 (needs theta_right > 1-gamma, or a lighter left tail)")


def _up_two_sided(gamma: float, dist: InnovationSpec) -> Classification:
    theta_r, theta_l = dist.theta_right, dist.theta_left
    pos = _position(theta_l, gamma)
    if pos > 0:
        return _transient("Theorem 1.8 part 1")
    if pos < 0 and theta_r > theta_l:
        return _verdict(Regime.RECURRENT, "Theorem 1.8 part 2", 1.0)
    return _undecided("outside Theorem 1.8 (needs theta_left > 1-gamma, or a lighter right tail)")


def classify(model: ModelSpec, dist: InnovationSpec) -> Classification:
    """
    Place (model, dist) in the phase diagram.

    Pure and total on valid specs: combinations no result covers come back
    as UNDECIDED rather than raising.

    Raises:
        DomainError: If dist is not a heavy-tailed InnovationSpec.
    """
    if not isinstance(dist, InnovationSpec):
        raise DomainError("classify needs a heavy-tailed InnovationSpec")
    gamma = model.gamma
    if model.drift == Drift.DOWN:
        if dist.side == Side.POSITIVE_ONLY:
            result = _down_one_sided(gamma, dist)
        elif dist.side == Side.TWO_SIDED:
            result = _down_two_sided(gamma, dist)
        else:
            result = _undecided("down drift with only negative innovations is not covered")
    else:
        if dist.side == Side.NEGATIVE_ONLY:
            result = _up_one_sided(gamma, dist)
        elif dist.side == Side.TWO_SIDED:
            result = _up_two_sided(gamma, dist)
        else:
            result = _undecided("up drift with only positive innovations is not covered")
    logger.debug(f"classify({model.drift.value}, gamma={gamma}, {dist.side.value}) -> {result.regime.value}")
    return result


@dataclass(frozen=True)
class LyapunovRecipe:
    """Lyapunov function, criterion and partition exponent that certify a verdict."""
    lyapunov: LyapunovSpec
    condition: Condition
    beta: Optional[float] = None
    window: Optional[Tuple[float, float]] = None
    fallback: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lyapunov": self.lyapunov.to_dict(),
            "condition": self.condition.to_dict(),
            "beta": self.beta,
            "window": list(self.window) if self.window else None,
            "fallback": self.fallback,
        }


def _recurrence(delta: float, **kw) -> LyapunovRecipe:
    return LyapunovRecipe(LyapunovSpec(delta), Condition(ConditionKind.T2_1_RECURRENCE), **kw)


def _transience(delta: float, **kw) -> LyapunovRecipe:
    # delta > 0 here is the decay rate of the clipped g = x^(-delta)
    return LyapunovRecipe(LyapunovSpec(-delta, clipped=True), Condition(ConditionKind.T2_1_TRANSIENCE), **kw)


def _mid(lo: float, hi: float) -> float:
    return 0.5 * (lo + hi)


def _supercritical_delta(c: float, theta: float) -> float:
    delta = -0.5 * theta
    for _ in range(60):
        if c * k_const(delta, theta) > 1.0:
            return delta
        delta *= 0.5
    raise DomainError(f"no negative delta with c*K > 1 for c={c}, theta={theta}")


def lyapunov_recipe(model: ModelSpec, dist: InnovationSpec) -> LyapunovRecipe:
    """
    Lyapunov exponent, criterion and beta used by the proof of the verdict.

    Open parameter windows are resolved by their midpoints, so the recipe is
    deterministic. When a window is empty the recipe falls back to a simple
    exponent and sets fallback=True.

    Raises:
        DomainError: If the verdict is UNDECIDED.
    """
    verdict = classify(model, dist)
    clause = verdict.clause
    gamma = model.gamma
    if verdict.regime == Regime.UNDECIDED:
        raise DomainError(f"no recipe for an undecided point ({clause})")

    if clause == "Theorem 1.3 case 1(a)":
        return _recurrence(dist.theta_right / 4.0)
    if clause == "Theorem 1.3 case 1(b)":
        return _transience(dist.theta_right / 2.0)
    if clause == "Theorem 1.3 case 2(a)":
        return _recurrence(verdict.delta0 / 2.0)
    if clause == "Theorem 1.3 case 2(b)":
        delta = _supercritical_delta(dist.c_right, dist.theta_right)
        return _transience(-delta)
    if clause == "Theorem 1.4 part 1":
        return _recurrence(dist.theta_left)
    if clause == "Theorem 1.4 part 2":
        return _recurrence(verdict.delta0 / 2.0)
    if clause == "Theorem 1.4 part 3":
        # jumps to the origin cost x^(delta - theta); the drift gains x^(gamma - 1)
        hi = dist.theta_left - (1.0 - gamma)
        return _transience(_mid(0.0, hi), window=(0.0, hi))

    if clause == "Theorem 1.7 part 1":
        theta = dist.theta_right
        # the delta window is nonempty only for beta above this bound
        beta_lo = max(0.0, (1.0 - gamma - theta * (1.0 - theta)) / theta)
        if beta_lo >= gamma:
            return _recurrence(theta / 4.0, beta=0.5 * gamma, fallback=True)
        beta = _mid(beta_lo, gamma)
        lo = (1.0 - gamma - beta * theta) / (1.0 - theta)
        return _recurrence(_mid(max(lo, 0.0), theta), beta=beta, window=(max(lo, 0.0), theta))
    if clause == "Theorem 1.7 part 2":
        theta, theta_p = dist.theta_right, dist.theta_left
        lo = max(gamma / (1.0 - theta), 1.0 / (1.0 - (theta_p - theta)))
        if lo < 1.0:
            beta = _mid(lo, 1.0)
            hi = beta * (1.0 - (theta_p - theta)) - 1.0
            return _transience(_mid(0.0, hi), beta=beta, window=(0.0, hi))
        return _transience(0.5 * min(theta, theta_p - theta), fallback=True)
    if clause == "Theorem 1.8 part 1":
        theta = dist.theta_left
        beta = _mid(max(gamma, (1.0 - gamma) / theta), 1.0)
        hi = beta * theta - (1.0 - gamma)
        return _transience(_mid(0.0, hi), beta=beta, window=(0.0, hi))
    if clause == "Theorem 1.8 part 2":
        theta, theta_p = dist.theta_left, dist.theta_right
        beta = _mid(gamma * theta / theta_p, 1.0 - theta)
        b = max(0.0, (theta - beta * theta_p) / (1.0 - gamma), (theta - beta * theta_p) / (1.0 - beta))
        return _recurrence(_mid(b, theta), beta=beta, window=(b, theta))
    raise DomainError(f"no recipe for clause {clause!r}")
