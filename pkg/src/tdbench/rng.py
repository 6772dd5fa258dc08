"""Deterministic, random-access random numbers built on SplitMix64.

The generators here are *counter-based*: draw ``i`` of stream ``key`` is a
pure function of ``(key, i)``.  That buys two properties the synthetic data
pipeline relies on:

* bit-for-bit reproducibility across platforms and backends (all integer
  arithmetic, no hidden state), and
* random access — vectorized numpy code and per-element compiled loops can
  consume the same stream in any order and agree exactly.

``SequentialRng`` wraps the same function with a running counter for
host-side code that just wants "the next draw".
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "splitmix64",
    "derive_key",
    "uniform_at",
    "normal_at",
    "uniform_array",
    "normal_array",
    "SequentialRng",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 2.0**-53


def splitmix64(state: int) -> int:
    """The SplitMix64 output function for one 64-bit state value."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_key(key: int, tag: int) -> int:
    """Derive an independent substream key, e.g. one per noise source."""
    return splitmix64((key ^ splitmix64(tag & _MASK64)) & _MASK64)


def _output_at(key: int, index: int) -> int:
    # Draw `index` of the stream is the SplitMix64 output at state
    # key + index * GOLDEN, i.e. element `index` of the sequence seeded
    # with `key`.
    return splitmix64((key + index * _GOLDEN) & _MASK64)


def uniform_at(key: int, index: int) -> float:
    """Uniform draw in [0, 1) at position ``index`` of stream ``key``."""
    return (_output_at(key, index) >> 11) * _INV_2_53


def normal_at(key: int, index: int) -> float:
    """Standard normal draw at position ``index`` of stream ``key``.

    Uses one Box-Muller pair per index (two underlying uniforms), keeping the
    mapping index -> value stateless.
    """
    u1 = ((_output_at(key, 2 * index) >> 11) + 1) * _INV_2_53  # (0, 1]
    u2 = (_output_at(key, 2 * index + 1) >> 11) * _INV_2_53  # [0, 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def _outputs_vec(key: int, indices: np.ndarray) -> np.ndarray:
    """Vectorized `_output_at` over an int64/uint64 index array."""
    with np.errstate(over="ignore"):
        z = np.uint64(key) + indices.astype(np.uint64) * np.uint64(_GOLDEN)
        z = z + np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def uniform_array(key: int, start: int, count: int) -> np.ndarray:
    """Uniform [0, 1) draws ``start .. start+count-1`` of stream ``key``."""
    idx = np.arange(start, start + count, dtype=np.uint64)
    return (_outputs_vec(key, idx) >> np.uint64(11)).astype(np.float64) * _INV_2_53


def normal_array(key: int, start: int, count: int) -> np.ndarray:
    """Standard normal draws ``start .. start+count-1`` of stream ``key``."""
    idx = np.arange(start, start + count, dtype=np.uint64)
    raw1 = _outputs_vec(key, idx * np.uint64(2))
    raw2 = _outputs_vec(key, idx * np.uint64(2) + np.uint64(1))
    u1 = ((raw1 >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
    u2 = (raw2 >> np.uint64(11)).astype(np.float64) * _INV_2_53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


class SequentialRng:
    """A stateful cursor over a counter-based stream.

    Convenient for host-side sampling loops (object placement and the like)
    where draws happen one at a time in a fixed order.
    """

    def __init__(self, key: int) -> None:
        self.key = key & _MASK64
        self.cursor = 0

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        value = uniform_at(self.key, self.cursor)
        self.cursor += 1
        return lo + (hi - lo) * value

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        value = normal_at(self.key, self.cursor)
        self.cursor += 1
        return mu + sigma * value

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi)."""
        span = hi - lo
        if span <= 0:
            raise ValueError(f"empty integer range [{lo}, {hi})")
        value = _output_at(self.key, self.cursor)
        self.cursor += 1
        return lo + value % span
