"""
Chain - the sublinear-drift recursion, trajectories and passage times.

    zeta_{n+1} = (zeta_n -+ zeta_n^gamma + alpha_{n+1})^+

Innovations are drawn from counter-keyed uniforms (see rng), so trajectory k
of a campaign is the same whether it runs alone, in a batch, or in another
process.
"""

import csv
import math
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

from .dist import Innovation, InnovationSpec, PointMass, has_negative_mass, mass, sample
from .errors import DomainError, NumericalError
from .rng import uniforms

logger = logging.getLogger(__name__)

TRAJECTORY_SCHEMA = "# heavytail trajectory v1"
MAX_DETERMINISTIC_STEPS = 100_000_000
PLAIN_TARGET_FLOOR = 0.1


class Drift(str, Enum):
    """Sign of the sublinear drift term."""
    DOWN = "down"
    UP = "up"


class HitVariant(str, Enum):
    """Deterministic skeletons: x - x^gamma, or x - x^gamma + 1."""
    PLAIN = "plain"
    SHIFTED = "shifted"


@dataclass(frozen=True)
class ModelSpec:
    """
    Chain model.

    target_a > 0 gives the target set A = [0, a]; target_a = 0 is the single
    state 0 (absorption time tau_0).
    """
    drift: Drift = Drift.DOWN
    gamma: float = 0.5
    reflect: bool = True
    target_a: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "drift", Drift(self.drift))
        if not 0.0 < self.gamma < 1.0:
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not (self.target_a >= 0 and math.isfinite(self.target_a)):
            raise DomainError(f"target_a must be >= 0, got {self.target_a}")
        if 0.0 < self.target_a <= 1.0:
            logger.warning(
                f"target_a={self.target_a} <= 1: recurrence results assume A = [0, a] with a > 1"
            )

    @property
    def sign(self) -> float:
        return -1.0 if self.drift == Drift.DOWN else 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "drift": self.drift.value,
            "gamma": self.gamma,
            "reflect": self.reflect,
            "target_a": self.target_a,
        }


@dataclass
class PassageResult:
    """Outcome of one first-passage run."""
    tau: Optional[int]
    censored: bool
    horizon: int
    hit_value: Optional[float]
    max_excursion: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tau": "CENSORED" if self.censored else self.tau,
            "horizon": self.horizon,
            "hit_value": self.hit_value,
            "max_excursion": self.max_excursion,
        }


@dataclass
class PassageBatch:
    """Passage results for many trajectories; tau is -1 where censored."""
    indices: np.ndarray
    tau: np.ndarray
    hit_value: np.ndarray
    max_excursion: np.ndarray
    horizon: int

    @property
    def censored(self) -> np.ndarray:
        return self.tau < 0

    def __len__(self) -> int:
        return len(self.indices)

    def result(self, i: int) -> PassageResult:
        cens = bool(self.tau[i] < 0)
        return PassageResult(
            tau=None if cens else int(self.tau[i]),
            censored=cens,
            horizon=self.horizon,
            hit_value=None if cens else float(self.hit_value[i]),
            max_excursion=float(self.max_excursion[i]),
        )

    @classmethod
    def concat(cls, parts: Sequence["PassageBatch"], horizon: int) -> "PassageBatch":
        if not parts:
            empty = np.array([], dtype=np.float64)
            return cls(np.array([], dtype=np.int64), np.array([], dtype=np.int64), empty, empty, horizon)
        batch = cls(
            indices=np.concatenate([p.indices for p in parts]),
            tau=np.concatenate([p.tau for p in parts]),
            hit_value=np.concatenate([p.hit_value for p in parts]),
            max_excursion=np.concatenate([p.max_excursion for p in parts]),
            horizon=horizon,
        )
        order = np.argsort(batch.indices, kind="stable")
        return cls(batch.indices[order], batch.tau[order], batch.hit_value[order],
                   batch.max_excursion[order], horizon)


def step(model: ModelSpec, x, alpha):
    """
    One transition (x -+ x^gamma + alpha)^+ (vectorised).

    With reflect=False the unclipped value is returned; callers must ensure
    it stays nonnegative.
    """
    x_arr = np.asarray(x, dtype=np.float64)
    nxt = x_arr + model.sign * x_arr ** model.gamma + np.asarray(alpha, dtype=np.float64)
    if model.reflect:
        nxt = np.maximum(nxt, 0.0)
    return float(nxt) if np.ndim(nxt) == 0 else nxt


def innovations(dist: Innovation, master_seed: int, index: int, steps: np.ndarray) -> np.ndarray:
    """Innovations of trajectory `index` at the given step numbers."""
    return np.atleast_1d(sample(dist, uniforms(master_seed, index, steps)))


def simulate(
    model: ModelSpec,
    dist: Innovation,
    x0: float,
    horizon: int,
    seed: int,
    index: int = 0,
) -> np.ndarray:
    """
    Materialise a trajectory of length horizon + 1 (states 0..horizon).

    Args:
        model: Chain model.
        dist: Innovation law.
        x0: Initial state, >= 0.
        horizon: Number of steps, >= 1.
        seed: Master seed.
        index: Trajectory index within the campaign.

    Returns:
        Array of states with trajectory[0] == x0.
    """
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    if x0 < 0:
        raise DomainError(f"x0 must be >= 0, got {x0}")
    alphas = innovations(dist, seed, index, np.arange(1, horizon + 1))
    traj = np.empty(horizon + 1, dtype=np.float64)
    traj[0] = x0
    x = float(x0)
    for n in range(horizon):
        x = step(model, x, alphas[n])
        traj[n + 1] = x
    return traj


def escape_bound_enabled(model: ModelSpec, dist: Innovation) -> bool:
    """Escape pruning is exact only for down-drift chains with innovations >= 0."""
    return model.drift == Drift.DOWN and not has_negative_mass(dist) and model.target_a > 0


def escape_floor(model: ModelSpec) -> float:
    """Level above which a step can at most halve the state: max(a, 2^(1/(1-gamma)))."""
    return max(model.target_a, 2.0 ** (1.0 / (1.0 - model.gamma)))


def min_steps_to_target(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """
    Lower bound on the steps a down-drift chain with nonnegative innovations
    needs to reach A from x.

    The chain dominates the deterministic skeleton x - x^gamma, and above the
    escape floor b each skeleton step covers at most 2 units of the
    continuum time (x^(1-gamma) - b^(1-gamma)) / (1 - gamma).
    """
    one_minus = 1.0 - model.gamma
    b = escape_floor(model)
    bound = (np.asarray(x) ** one_minus - b ** one_minus) / (2.0 * one_minus)
    return np.where(np.asarray(x) > b, bound, 0.0)


def passage_times_batch(
    model: ModelSpec,
    dist: Innovation,
    x0: float,
    horizon: int,
    seed: int,
    indices: Union[Sequence[int], np.ndarray],
    prune: bool = True,
) -> PassageBatch:
    """
    First passage into A for a batch of trajectories, advanced in lock-step.

    Trajectories that provably cannot reach A before the horizon are censored
    early (see min_steps_to_target); this never changes a result.

    Args:
        model: Chain model.
        dist: Innovation law.
        x0: Common starting state, x0 > target_a.
        horizon: Step budget.
        seed: Master seed.
        indices: Trajectory indices.
        prune: Allow exact early censoring.

    Returns:
        PassageBatch ordered like `indices`.
    """
    if x0 <= model.target_a:
        raise DomainError(f"x0={x0} starts inside A = [0, {model.target_a}]")
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    idx = np.asarray(indices, dtype=np.int64)
    count = len(idx)
    tau = np.full(count, -1, dtype=np.int64)
    hit_value = np.full(count, np.nan)
    max_exc = np.full(count, float(x0))
    state = np.full(count, float(x0))
    live = np.arange(count)
    can_prune = prune and escape_bound_enabled(model, dist)

    for n in range(1, horizon + 1):
        if live.size == 0:
            break
        alpha = np.atleast_1d(sample(dist, uniforms(seed, idx[live], n)))
        x = step(model, state[live], alpha)
        x = np.atleast_1d(x)
        max_exc[live] = np.maximum(max_exc[live], x)
        hit = x <= model.target_a
        if np.any(hit):
            tau[live[hit]] = n
            hit_value[live[hit]] = x[hit]
        keep = ~hit
        if can_prune:
            keep &= ~(min_steps_to_target(model, x) > horizon - n)
        state[live] = x
        live = live[keep]

    logger.debug(f"batch of {count}: {int(np.sum(tau >= 0))} hits within {horizon} steps")
    return PassageBatch(idx, tau, hit_value, max_exc, horizon)


def passage_time(
    model: ModelSpec,
    dist: Innovation,
    x0: float,
    horizon: int,
    seed: int,
    index: int = 0,
) -> PassageResult:
    """
    First n >= 1 with state in A, or censored at the horizon.

    Streams states without storing the trajectory; equivalent to the
    single-trajectory case of passage_times_batch.

    Raises:
        DomainError: If x0 is already inside A.
    """
    return passage_times_batch(model, dist, x0, horizon, seed, [index]).result(0)


@dataclass
class DeterministicHit:
    """Hitting time of a deterministic skeleton with its continuum approximations."""
    exact_steps: int
    asymptotic: float
    refined: Optional[float] = None

    @property
    def ratio(self) -> float:
        return self.exact_steps / self.asymptotic

    def to_dict(self) -> Dict[str, Any]:
        return {"exact_steps": self.exact_steps, "asymptotic": self.asymptotic, "refined": self.refined}


def deterministic_hitting_time(
    gamma: float,
    x0: float,
    a: float,
    variant: HitVariant = HitVariant.PLAIN,
) -> DeterministicHit:
    """
    Steps for x -> x - x^gamma (PLAIN) or x -> x - x^gamma + 1 (SHIFTED) to reach [0, a].

    asymptotic is x0^(1-gamma)/(1-gamma). For PLAIN, refined subtracts the
    continuum time below a and the Euler-step correction (gamma/2) ln(x0/a).

    Raises:
        DomainError: If x0 <= a, a < 0.1 (PLAIN) or a <= 1 (SHIFTED, fixed point 1).
    """
    variant = HitVariant(variant)
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    if variant == HitVariant.SHIFTED and a <= 1.0:
        raise DomainError(f"SHIFTED skeleton has fixed point 1 and never reaches a={a}")
    if variant == HitVariant.PLAIN and a < PLAIN_TARGET_FLOOR:
        raise DomainError(f"PLAIN skeleton needs a >= {PLAIN_TARGET_FLOOR}, got {a}")
    if x0 <= a:
        raise DomainError(f"x0={x0} must exceed a={a}")

    shift = 1.0 if variant == HitVariant.SHIFTED else 0.0
    x = float(x0)
    steps = 0
    while x > a:
        x = x - x ** gamma + shift
        steps += 1
        if steps > MAX_DETERMINISTIC_STEPS:
            raise NumericalError(f"skeleton did not reach a={a} within {MAX_DETERMINISTIC_STEPS} steps")

    one_minus = 1.0 - gamma
    asymptotic = x0 ** one_minus / one_minus
    refined = None
    if variant == HitVariant.PLAIN:
        refined = (x0 ** one_minus - a ** one_minus) / one_minus - 0.5 * gamma * math.log(x0 / a)
    return DeterministicHit(steps, asymptotic, refined)


def accessibility_bound(model: ModelSpec, dist: Innovation, x: float) -> float:
    """
    Lower bound r^T on P_x(tau_A <= T + 1) for a down-drift chain.

    r = P(0 <= alpha <= 1) and T is the SHIFTED skeleton time from x to a:
    with every innovation in [0, 1] the chain stays below that skeleton.
    """
    if model.drift != Drift.DOWN:
        raise DomainError("accessibility_bound applies to down-drift chains")
    if isinstance(dist, PointMass):
        r = 1.0 if 0.0 <= dist.value <= 1.0 else 0.0
    else:
        r = mass(dist, 0.0, 1.0) if isinstance(dist, InnovationSpec) else 0.0
    if x <= model.target_a:
        return 1.0
    t = deterministic_hitting_time(model.gamma, x, model.target_a, HitVariant.SHIFTED).exact_steps
    return r ** t


def write_trajectory_csv(path: Union[str, Path], trajectory: np.ndarray) -> Path:
    """Write a trajectory as CSV (n, state) behind a versioned header comment."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        handle.write(TRAJECTORY_SCHEMA + "\n")
        writer = csv.writer(handle)
        writer.writerow(["n", "state"])
        for n, state in enumerate(trajectory):
            writer.writerow([n, repr(float(state))])
    logger.info(f"Wrote trajectory of {len(trajectory)} states to {path}")
    return path
