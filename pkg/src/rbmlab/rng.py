"""Counter-based random numbers.

Every uniform draw is addressed by ``(chain key, counter)`` and computed by
the splitmix64 finalizer, so a draw never depends on how many other draws
were made before it. This is what makes chains replayable from any step and
independent of thread count. The compiled kernels implement the same
function bit-for-bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# domain tags mixed into chain keys so that initialization draws never
# collide with Gibbs-step draws
INIT_TAG = 0x1D8E4E27C47D124F
SPAWN_TAG = 0x5851F42D4C957F2D

_U64 = np.uint64


def mix64(z: int) -> int:
    """splitmix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=_U64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _U64(_M1)
        z = (z ^ (z >> _U64(27))) * _U64(_M2)
    return z ^ (z >> _U64(31))


def uniforms(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Uniform doubles in [0, 1) for broadcast ``keys`` x ``counters``.

    ``u = (mix64(key + (counter + 1) * GOLDEN) >> 11) * 2**-53``, i.e. the
    ``counter``-th output of a splitmix64 sequence seeded with ``key``.
    """
    keys = np.asarray(keys, dtype=_U64)
    counters = np.asarray(counters, dtype=_U64)
    with np.errstate(over="ignore"):
        state = keys + (counters + _U64(1)) * _U64(GOLDEN)
    bits = mix64_array(state) >> _U64(11)
    return bits.astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True)
class SeedSpec:
    """A master seed plus a stream id; distinct pairs give independent keys."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 0 or value > MASK64:
                raise ValueError(f"{name} must be an integer in [0, 2**64), got {value!r}")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "stream_id", int(self.stream_id))

    @property
    def key(self) -> int:
        base = mix64(self.master_seed + GOLDEN)
        return mix64(base ^ mix64(self.stream_id + 2 * GOLDEN))

    def spawn(self, *labels: int) -> "SeedSpec":
        """Child SeedSpec for a labelled sub-task (e.g. one training update)."""
        stream = self.stream_id
        for label in labels:
            stream = mix64(stream ^ SPAWN_TAG ^ mix64(int(label) + 3 * GOLDEN))
        return SeedSpec(self.master_seed, stream)

    def chain_keys(self, n_chains: int, offset: int = 0) -> np.ndarray:
        """One 64-bit key per chain, ``offset`` shifts the chain index."""
        idx = np.arange(offset, offset + n_chains, dtype=_U64)
        with np.errstate(over="ignore"):
            return mix64_array(_U64(self.key) ^ mix64_array(idx * _U64(GOLDEN) + _U64(1)))

    def generator(self) -> np.random.Generator:
        """numpy Generator for non-chain randomness (shuffles, prototypes)."""
        return np.random.Generator(np.random.PCG64([self.master_seed, self.stream_id]))


def init_keys(keys: np.ndarray) -> np.ndarray:
    """Keys for initialization draws, disjoint from the Gibbs-step domain."""
    return mix64_array(np.asarray(keys, dtype=_U64) ^ _U64(INIT_TAG))
