"""
Innovation laws - normalised heavy-tailed distributions for the chain increments.

Each active side carries a Pareto-type tail c_y |y|^(-1-theta) beyond the
onset y0 and a uniform body on [0, y0] (or [-y0, 0]) absorbing the remaining
mass, so every CDF is piecewise closed-form. TWO_SIDED laws split the body
mass evenly between the sides; the side masses are fixed.
"""

import math
import logging
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np

from .errors import DivergenceError, DomainError, NumericalError
from .quadrature import integrate, integrate_to_infinity
from .rng import rehash_uniform

logger = logging.getLogger(__name__)

MAX_REJECTION_ROUNDS = 1000


class Side(str, Enum):
    """Which half-lines carry innovation mass."""
    POSITIVE_ONLY = "positive"
    NEGATIVE_ONLY = "negative"
    TWO_SIDED = "two-sided"


class CProfile(str, Enum):
    """Shape of the tail constant c_y."""
    CONSTANT = "constant"
    OSCILLATING = "oscillating"


class Part(str, Enum):
    """Positive or negative part of an innovation."""
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class InnovationSpec:
    """
    Heavy-tailed innovation law.

    Tail constants default to theta * y0^theta / 2, which puts half the mass
    of a one-sided law in its tail. A two-sided law splits that half between
    its tails, theta * y0^theta / 4 per side. With c_profile OSCILLATING the tail
    constant is c_y = c (1 + amplitude sin(ln y)), bounded by c(1 -+ amplitude).
    """
    side: Side = Side.POSITIVE_ONLY
    theta_right: Optional[float] = None
    theta_left: Optional[float] = None
    c_right: Optional[float] = None
    c_left: Optional[float] = None
    y0: float = 1.0
    c_profile: CProfile = CProfile.CONSTANT
    amplitude: float = 0.0
    lattice: bool = False

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "c_profile", CProfile(self.c_profile))
        if not (self.y0 > 0 and math.isfinite(self.y0)):
            raise DomainError(f"y0 must be positive, got {self.y0}")
        if self.c_profile == CProfile.OSCILLATING:
            if not 0.0 <= self.amplitude < 1.0:
                raise DomainError(f"amplitude must lie in [0, 1), got {self.amplitude}")
        share = 0.25 if self.side == Side.TWO_SIDED else 0.5
        for name in ("right", "left"):
            theta_key, c_key = f"theta_{name}", f"c_{name}"
            if not self._active(name):
                continue
            theta = getattr(self, theta_key)
            if theta is None or not 0.0 < theta < 1.0:
                raise DomainError(f"{theta_key} must lie in (0, 1) for side {self.side.value}, got {theta}")
            c = getattr(self, c_key)
            if c is None:
                object.__setattr__(self, c_key, share * theta * self.y0 ** theta)
            elif not c > 0:
                raise DomainError(f"{c_key} must be positive, got {c}")
        if self.body_mass <= 0.0:
            raise DomainError(
                f"tail masses {self.tail_mass('right'):.4g} + {self.tail_mass('left'):.4g} "
                "leave no mass for the body; lower c or raise y0"
            )

    def _active(self, name: str) -> bool:
        if name == "right":
            return self.side in (Side.POSITIVE_ONLY, Side.TWO_SIDED)
        return self.side in (Side.NEGATIVE_ONLY, Side.TWO_SIDED)

    def params(self, name: str) -> Optional[Tuple[float, float]]:
        """(theta, c) of a side, or None when the side carries no mass."""
        if not self._active(name):
            return None
        return getattr(self, f"theta_{name}"), getattr(self, f"c_{name}")

    @property
    def amp(self) -> float:
        return self.amplitude if self.c_profile == CProfile.OSCILLATING else 0.0

    def tail_mass(self, name: str) -> float:
        """Mass of the tail beyond y0 on one side."""
        p = self.params(name)
        if p is None:
            return 0.0
        return float(_tail_fn(p[1], p[0], self.amp, np.asarray(self.y0)))

    @property
    def body_mass(self) -> float:
        """Total body mass (both sides together)."""
        return 1.0 - self.tail_mass("right") - self.tail_mass("left")

    def body_mass_side(self, name: str) -> float:
        if not self._active(name):
            return 0.0
        if self.side == Side.TWO_SIDED:
            return 0.5 * self.body_mass
        return self.body_mass

    def c_bounds(self, name: str) -> Tuple[float, float]:
        """(b1, b2) with b1 <= c_y <= b2 on one side; (0, 0) for an inactive side."""
        p = self.params(name)
        if p is None:
            return 0.0, 0.0
        return p[1] * (1.0 - self.amp), p[1] * (1.0 + self.amp)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["side"] = self.side.value
        data["c_profile"] = self.c_profile.value
        data["body_mass"] = self.body_mass
        return data


@dataclass(frozen=True)
class PointMass:
    """Degenerate law with all mass at one value (deterministic innovations)."""
    value: float = 0.0
    lattice: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {"point_mass": self.value}


Innovation = Union[InnovationSpec, PointMass]


def _tail_fn(c: float, theta: float, amp: float, y: np.ndarray) -> np.ndarray:
    # integral of c(1 + amp sin ln t) t^(-1-theta) over (y, inf), y >= y0 > 0
    y = np.asarray(y, dtype=np.float64)
    finite = np.isfinite(y)
    safe = np.where(finite, y, 1.0)
    power = safe ** (-theta)
    value = c * power / theta
    if amp:
        log_y = np.log(safe)
        value = value + c * amp * power * (theta * np.sin(log_y) + np.cos(log_y)) / (1.0 + theta ** 2)
    return np.where(finite, value, 0.0)


def _c_y(spec: InnovationSpec, c: float, y: np.ndarray) -> np.ndarray:
    if spec.amp:
        return c * (1.0 + spec.amp * np.sin(np.log(y)))
    return np.full_like(y, c)


def _scalar(out: np.ndarray, like) -> Union[float, np.ndarray]:
    return float(out) if np.ndim(like) == 0 else out


def has_negative_mass(dist: Innovation) -> bool:
    """Whether innovations can be negative."""
    if isinstance(dist, PointMass):
        return dist.value < 0
    return dist.side != Side.POSITIVE_ONLY


def density(spec: InnovationSpec, y):
    """
    Density of the innovation law at y (vectorised).

    Tails: c_y |y|^(-1-theta) for |y| >= y0 on an active side; body:
    body_mass_side / y0; zero elsewhere.
    """
    y_arr = np.asarray(y, dtype=np.float64)
    out = np.zeros_like(y_arr)
    abs_y = np.abs(y_arr)
    for name, sign in (("right", 1.0), ("left", -1.0)):
        p = spec.params(name)
        if p is None:
            continue
        theta, c = p
        on_side = (y_arr >= 0) if sign > 0 else (y_arr < 0)
        body = on_side & (abs_y < spec.y0)
        tail = on_side & (abs_y >= spec.y0)
        out = np.where(body, spec.body_mass_side(name) / spec.y0, out)
        safe = np.where(tail, abs_y, spec.y0)
        out = np.where(tail, _c_y(spec, c, safe) * safe ** (-1.0 - theta), out)
    return _scalar(out, y)


def _side_tail(spec: InnovationSpec, name: str, y) -> np.ndarray:
    y_arr = np.asarray(y, dtype=np.float64)
    p = spec.params(name)
    if p is None:
        return np.zeros_like(y_arr)
    theta, c = p
    t_mass = spec.tail_mass(name)
    b_mass = spec.body_mass_side(name)
    in_body = y_arr < spec.y0
    tail = _tail_fn(c, theta, spec.amp, np.maximum(y_arr, spec.y0))
    body = t_mass + b_mass * (spec.y0 - np.maximum(y_arr, 0.0)) / spec.y0
    return np.where(in_body, body, tail)


def tail_right(spec: InnovationSpec, y):
    """P(alpha > y) for y >= 0, closed form."""
    return _scalar(_side_tail(spec, "right", y), y)


def tail_left(spec: InnovationSpec, y):
    """P(alpha < -y) for y >= 0, closed form."""
    return _scalar(_side_tail(spec, "left", y), y)


def cdf(spec: InnovationSpec, a):
    """P(alpha <= a)."""
    a_arr = np.asarray(a, dtype=np.float64)
    neg = tail_left(spec, np.where(a_arr < 0, -a_arr, 0.0))
    pos = 1.0 - np.asarray(tail_right(spec, np.where(a_arr >= 0, a_arr, 0.0)))
    return _scalar(np.where(a_arr < 0, neg, pos), a)


def mass(spec: InnovationSpec, lo: float, hi: float) -> float:
    """P(lo < alpha <= hi) without cancellation against 1; lo, hi may be infinite."""
    if hi <= lo:
        return 0.0
    total = 0.0
    if hi > 0:
        total += float(tail_right(spec, max(lo, 0.0))) - float(tail_right(spec, hi))
    if lo < 0:
        total += float(tail_left(spec, max(-hi, 0.0))) - float(tail_left(spec, -lo))
    return total


def sample(spec: Innovation, u):
    """
    Inverse-CDF sample for uniforms u in (0, 1), vectorised and deterministic.

    The unit interval is cut into (left tail, left body, right body, right
    tail). Constant-profile tails invert to y0 (T / r)^(1/theta); oscillating
    tails use rejection against the constant envelope c(1 + amplitude), with
    proposals derived from the bits of u so the same u gives the same sample.

    Raises:
        DomainError: If any u lies outside (0, 1).
    """
    u_arr = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if not np.all((u_arr > 0.0) & (u_arr < 1.0)):
        raise DomainError("sample() needs uniforms strictly inside (0, 1)")
    if isinstance(spec, PointMass):
        return _scalar(np.full_like(u_arr, spec.value), u)

    y0 = spec.y0
    t_left = spec.tail_mass("left")
    b_left = spec.body_mass_side("left")
    b_right = spec.body_mass_side("right")
    t_right = spec.tail_mass("right")
    right_tail_start = 1.0 - t_right
    out = np.empty_like(u_arr)

    left_tail = u_arr < t_left
    left_body = (~left_tail) & (u_arr < t_left + b_left)
    right_tail = (u_arr >= right_tail_start) & (t_right > 0)
    right_body = ~(left_tail | left_body | right_tail)

    if np.any(left_body):
        out[left_body] = -y0 + y0 * (u_arr[left_body] - t_left) / b_left
    if np.any(right_body):
        if b_right > 0:
            frac = (u_arr[right_body] - t_left - b_left) / b_right
            out[right_body] = y0 * np.clip(frac, 0.0, 1.0)
        else:
            # rounding gap at the top of a negative-only law
            out[right_body] = 0.0
    if np.any(left_tail):
        theta = spec.theta_left
        out[left_tail] = -_tail_draw(spec, theta, u_arr[left_tail], u_arr[left_tail] / t_left)
    if np.any(right_tail):
        theta = spec.theta_right
        residual = np.maximum(1.0 - u_arr[right_tail], 0.0) / t_right
        out[right_tail] = _tail_draw(spec, theta, u_arr[right_tail], residual)

    if spec.lattice:
        is_tail = left_tail | right_tail
        out = np.where(is_tail, np.sign(out) * np.maximum(1.0, np.rint(np.abs(out))), np.rint(out))
    return _scalar(out.reshape(np.shape(u)), u)


def _tail_draw(spec: InnovationSpec, theta: float, u: np.ndarray, residual: np.ndarray) -> np.ndarray:
    # residual in (0, 1]: position inside the tail segment, 1 at the onset
    if not spec.amp:
        return spec.y0 * np.clip(residual, 1e-300, 1.0) ** (-1.0 / theta)
    out = np.empty_like(u)
    pending = np.ones(u.shape, dtype=bool)
    ceiling = 1.0 + spec.amp
    for attempt in range(MAX_REJECTION_ROUNDS):
        idx = np.nonzero(pending)[0]
        if idx.size == 0:
            return out
        w = rehash_uniform(u[idx], 2 * attempt + 1)
        accept_u = rehash_uniform(u[idx], 2 * attempt + 2)
        y = spec.y0 * w ** (-1.0 / theta)
        ok = accept_u * ceiling <= 1.0 + spec.amp * np.sin(np.log(y))
        out[idx[ok]] = y[ok]
        pending[idx[ok]] = False
    if np.any(pending):
        raise NumericalError(f"rejection sampler did not accept within {MAX_REJECTION_ROUNDS} rounds")
    return out


@dataclass(frozen=True)
class RawLaw:
    """A nonnegative law Z given by survival and density functions."""
    survival: Callable[[np.ndarray], np.ndarray]
    density: Callable[[np.ndarray], np.ndarray]
    theta: Optional[float] = None
    breakpoints: Tuple[float, ...] = field(default_factory=tuple)


def part_law(spec: InnovationSpec, part: Part = Part.POSITIVE) -> RawLaw:
    """Law of the positive part (alpha+) or negative part (alpha-) of an innovation."""
    part = Part(part)
    name = "right" if part == Part.POSITIVE else "left"
    p = spec.params(name)
    sign = 1.0 if part == Part.POSITIVE else -1.0
    return RawLaw(
        survival=lambda z: np.asarray(_side_tail(spec, name, z)),
        density=lambda z: np.asarray(density(spec, sign * np.asarray(z, dtype=np.float64))),
        theta=None if p is None else p[0],
        breakpoints=(spec.y0,),
    )


def _as_law(law: Union[InnovationSpec, RawLaw], part: Part) -> RawLaw:
    return part_law(law, part) if isinstance(law, InnovationSpec) else law


def _check_window(law: RawLaw, delta: float, a: float, b: float) -> None:
    if delta <= 0:
        raise DomainError(f"phi exponent must be positive, got {delta}")
    if a < 0 or b < a:
        raise DomainError(f"window needs 0 <= a <= b, got [{a}, {b}]")
    if math.isinf(b) and law.theta is not None and delta >= law.theta:
        raise DivergenceError(
            f"E[Z^{delta}; Z >= {a}] is infinite for tail index {law.theta}"
        )


def truncated_expectation(
    law: Union[InnovationSpec, RawLaw],
    delta: float,
    a: float,
    b: float,
    part: Part = Part.POSITIVE,
) -> float:
    """
    E[Z^delta ; a <= Z < b] through the tail-function identity.

    The right-hand side is the integral of P(Z > t^(1/delta)) over
    [a^delta, b^delta] minus b^delta P(Z >= b) plus a^delta P(Z >= a);
    for b = inf the middle term is zero.

    Args:
        law: Innovation spec (with part) or a RawLaw.
        delta: Exponent of phi(z) = z^delta, positive.
        a: Lower window end, a >= 0.
        b: Upper window end, may be math.inf.
        part: Which part of an InnovationSpec to use.

    Raises:
        DivergenceError: If b is infinite and delta >= theta.
    """
    z = _as_law(law, part)
    _check_window(z, delta, a, b)
    if a == b:
        return 0.0
    inv = 1.0 / delta

    def integrand(t: np.ndarray) -> np.ndarray:
        return z.survival(t ** inv)

    t_lo = a ** delta
    breaks = sorted(p ** delta for p in z.breakpoints if a < p < b)
    if math.isinf(b):
        # beyond the last breakpoint the survival is a pure power tail
        t_split = max([t_lo, *breaks]) if breaks else max(t_lo, 1.0)
        head = integrate(integrand, t_lo, t_split, breakpoints=breaks).value
        if z.theta is None:
            tail = 0.0
        else:
            tail = integrate_to_infinity(integrand, t_split, z.theta * inv - 1.0).value
        boundary = 0.0
    else:
        head = integrate(integrand, t_lo, b ** delta, breakpoints=breaks).value
        tail = 0.0
        boundary = b ** delta * float(z.survival(np.asarray(b)))
    lower = a ** delta * float(z.survival(np.asarray(a))) if a > 0 else 0.0
    return head + tail - boundary + lower


def truncated_expectation_direct(
    law: Union[InnovationSpec, RawLaw],
    delta: float,
    a: float,
    b: float,
    part: Part = Part.POSITIVE,
) -> float:
    """E[Z^delta ; a <= Z < b] by direct quadrature against the density."""
    z = _as_law(law, part)
    _check_window(z, delta, a, b)
    if a == b:
        return 0.0

    def integrand(v: np.ndarray) -> np.ndarray:
        return v ** delta * z.density(v)

    breaks = [p for p in z.breakpoints if a < p < b]
    if math.isinf(b):
        t_split = max([a, *breaks]) if breaks else max(a, 1.0)
        head = integrate(integrand, a, t_split, breakpoints=breaks).value if t_split > a else 0.0
        if z.theta is None:
            return head
        return head + integrate_to_infinity(integrand, t_split, z.theta - delta).value
    return integrate(integrand, a, b, breakpoints=breaks).value
