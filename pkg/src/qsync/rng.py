"""Counter-based uniform draws keyed by (seed, trajectory, step, channel).

Each draw is a pure function of its key, so a trajectory's randomness does not
depend on how shots are batched or which worker runs them. The mixer is the
SplitMix64 finalizer applied once per key component.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# channel ids below this are dissipation measurements; noise events start here
NOISE_CHANNEL_BASE = 64


def _mix(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def _as_u64(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype.kind == "i":
        return arr.astype(np.int64).view(np.uint64)
    if arr.dtype.kind in "ub":
        return arr.astype(np.uint64)
    raise TypeError(f"integer key expected, got {arr.dtype}")


def uniform(seed, trajectory, step, channel) -> np.ndarray:
    """Uniform [0, 1) floats; arguments broadcast like numpy arrays."""
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(int(seed) & _MASK64) + _GOLDEN)
        for part in (trajectory, step, channel):
            h = _mix(h ^ (_as_u64(part) + _GOLDEN))
            h = h + _GOLDEN
        h = _mix(h)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


class TrajectoryStream:
    """Draw source for a block of trajectories at one time step.

    Noise events get consecutive channel ids starting at ``NOISE_CHANNEL_BASE`` in
    the order they are requested, which is fixed by the circuit.
    """

    def __init__(self, seed: int, trajectories: np.ndarray, step: int):
        self.seed = seed
        self.trajectories = np.asarray(trajectories)
        self.step = step
        self._next_noise = NOISE_CHANNEL_BASE

    def channel(self, channel: int) -> np.ndarray:
        return uniform(self.seed, self.trajectories, self.step, channel)

    def noise(self) -> np.ndarray:
        u = self.channel(self._next_noise)
        self._next_noise += 1
        return u
