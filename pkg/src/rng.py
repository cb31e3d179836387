"""
Counter-based uniforms.

A uniform is a pure function of (master_seed, trajectory, step, lane): any
innovation of any trajectory can be regenerated in isolation, and results do
not depend on how trajectories are batched or sharded across processes.
The mixer is the SplitMix64 finalizer applied to each key component in turn.
"""

from typing import Union

import numpy as np

ArrayLike = Union[int, float, np.ndarray]

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_K_TRAJ = np.uint64(0xD1B54A32D192ED03)
_K_STEP = np.uint64(0x8CB92BA72F3D8DD7)
_K_LANE = np.uint64(0xCA5A826395121157)
_TWO_M53 = 2.0 ** -53
_BELOW_ONE = np.nextafter(1.0, 0.0)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _as_u64(value: ArrayLike) -> np.ndarray:
    arr = np.asarray(value)
    if arr.dtype.kind == "u":
        return np.atleast_1d(arr.astype(np.uint64))
    return np.atleast_1d(arr.astype(np.int64)).astype(np.uint64)


def _to_unit(h: np.ndarray) -> np.ndarray:
    # 53 high bits offset by half an ulp; the top value rounds up to 1.0 and is clamped
    u = ((h >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
    return np.minimum(u, _BELOW_ONE)


def uniforms(master_seed: int, trajectory: ArrayLike, step: ArrayLike, lane: ArrayLike = 0) -> np.ndarray:
    """
    Uniforms in the open interval (0, 1) keyed by counters.

    Args:
        master_seed: Campaign seed (reduced modulo 2**64).
        trajectory: Trajectory index or array of indices.
        step: Step index or array of step indices.
        lane: Extra counter for draws that need more than one uniform per step.

    Returns:
        Float64 array with the broadcast shape of the counters.
    """
    seed = np.uint64(int(master_seed) & _MASK64)
    traj = _as_u64(trajectory)
    stp = _as_u64(step)
    ln = _as_u64(lane)
    with np.errstate(over="ignore"):
        h = _mix(np.atleast_1d(seed * _GOLDEN + _K_LANE))
        h = _mix(h ^ (traj * _K_TRAJ))
        h = _mix(h ^ (stp * _K_STEP))
        h = _mix(h ^ (ln * _K_LANE + _GOLDEN))
    return _to_unit(h)


def rehash_uniform(u: ArrayLike, lane: ArrayLike) -> np.ndarray:
    """Derive a fresh uniform from the bit pattern of an existing one."""
    bits = np.ascontiguousarray(np.atleast_1d(np.asarray(u, dtype=np.float64))).view(np.uint64)
    ln = _as_u64(lane)
    with np.errstate(over="ignore"):
        h = _mix(bits ^ (ln * _K_LANE + _GOLDEN))
        h = _mix(h ^ _K_STEP)
    return _to_unit(h)
