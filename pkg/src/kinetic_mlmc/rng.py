"""Counter-based random streams with per-sample addressing.

Every Monte Carlo sample owns its own stream, addressed by
``(master_seed, level, sample_index)``.  Draw ``j`` of a stream is a pure
function of the key and of ``j``, never of how many draws another sample
consumed, so trajectories can be generated in any batch size, in any order
and on any number of workers without changing a single draw.

The generator applies the splitmix64 finalizer to an affine counter walk,
which is the splitmix64 sequence itself with a per-stream start point.  All
three draw kinds consume exactly one 64-bit counter position:

* uniform: top 53 bits mapped to [0, 1)
* normal:  inverse standard normal CDF at (top 53 bits + 0.5) * 2**-53,
  clamped strictly below 1, so the draw is always finite and the draw
  count is fixed
* sign:    +1 when the top bit is 0, otherwise -1

The module-level helpers operate on numpy arrays of seeds and counters; the
vectorised samplers in :mod:`kinetic_mlmc.sampling` use them directly and
reproduce :class:`RngStream` draws bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S63 = np.uint64(63)
_ONE = np.uint64(1)
_U53_INV = 2.0 ** -53
_U_BELOW_ONE = np.nextafter(1.0, 0.0)
_SEED_MASK = (1 << 64) - 1


def _mix64(z: np.uint64 | np.ndarray) -> np.uint64 | np.ndarray:
    """splitmix64 finalizer, a bijection on 64-bit words."""
    # wraparound modulo 2**64 is the point; keep numpy quiet about it
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _MIX_A
        z = (z ^ (z >> _S27)) * _MIX_B
        return z ^ (z >> _S31)


@dataclass(frozen=True)
class StreamKey:
    """Address of one sample's stream inside one experiment."""

    master_seed: int
    level: int
    sample_index: int


def stream_seed(master_seed: int, level: int, sample_index: int | np.ndarray):
    """Derive the per-stream seed word for a key; vectorised over sample_index."""
    with np.errstate(over="ignore"):
        h = _mix64(np.uint64(int(master_seed) & _SEED_MASK) + _GAMMA)
        h = _mix64(h + _GAMMA * (np.uint64(level) + _ONE))
        if isinstance(sample_index, np.ndarray):
            idx = sample_index.astype(np.uint64)
        else:
            idx = np.uint64(sample_index)
        return _mix64(h + _GAMMA * (idx + _ONE))


def raw_draw(seed, counter):
    """64-bit word of draw ``counter`` of the stream seeded by ``seed``."""
    with np.errstate(over="ignore"):
        return _mix64(seed + _GAMMA * (counter + _ONE))


def uniform_from_raw(raw):
    """Map raw words to uniforms on [0, 1)."""
    return (raw >> _S11).astype(np.float64) * _U53_INV


def normal_from_raw(raw):
    """Map raw words to standard normals by CDF inversion.

    When all 53 top bits are set, ``(2**53 - 1) + 0.5`` rounds up to ``2**53``
    and the argument would hit exactly 1, so it is clamped to the largest
    double below 1 to keep the inverse CDF finite.
    """
    u = ((raw >> _S11).astype(np.float64) + 0.5) * _U53_INV
    return ndtri(np.minimum(u, _U_BELOW_ONE))


def signbit_from_raw(raw):
    """Top bit of the raw word: 0 encodes +1, 1 encodes -1."""
    return raw >> _S63


class RngStream:
    """Sequential view of one keyed counter stream."""

    __slots__ = ("seed", "counter")

    def __init__(self, seed: int | np.uint64):
        self.seed = np.uint64(seed)
        self.counter = np.uint64(0)

    def _next_raw(self) -> np.uint64:
        raw = raw_draw(self.seed, self.counter)
        self.counter = self.counter + _ONE
        return raw

    def draw_uniform(self) -> float:
        """Next uniform on [0, 1)."""
        return float(uniform_from_raw(self._next_raw()))

    def draw_normal(self) -> float:
        """Next standard normal."""
        return float(normal_from_raw(self._next_raw()))

    def draw_sign(self) -> int:
        """Next fair sign, +1 or -1."""
        return 1 if signbit_from_raw(self._next_raw()) == 0 else -1


def stream_for(key: StreamKey) -> RngStream:
    """Stream addressed by ``key``; equal keys always give equal draw sequences."""
    if key.level < 0 or key.sample_index < 0:
        raise ValueError("level and sample_index must be non-negative")
    return RngStream(stream_seed(key.master_seed, key.level, key.sample_index))


def draw_uniform(stream: RngStream) -> float:
    return stream.draw_uniform()


def draw_normal(stream: RngStream) -> float:
    return stream.draw_normal()


def draw_sign(stream: RngStream) -> int:
    return stream.draw_sign()
