"""Deterministic random number generation.

All randomness in this package flows through :class:`SeededRng`, a
counter-based SplitMix64 generator.  The raw 64-bit and uniform streams are
pure integer arithmetic and therefore bit-identical on every platform.
Gaussian variates are produced from the uniform stream with Box-Muller;
they additionally depend on the platform's log/sin/cos and are bit-stable
for a fixed platform and numpy build.

The generator algorithm is part of the package contract and will not
change between releases.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1

# 2**-53, the spacing used to map 53-bit integers onto [0, 1).
_INV_2_53 = 1.0 / 9007199254740992.0


def _mix(z: np.ndarray) -> np.ndarray:
    """SplitMix64 output function on a uint64 array."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class SeededRng:
    """Counter-based SplitMix64 stream.

    Word ``i`` of the stream is ``mix(seed + (i + 1) * GOLDEN)`` computed in
    wrapping uint64 arithmetic, so any block of draws can be produced
    independently of draw granularity.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _U64_MASK
        self._counter = 0

    def _raw(self, n: int) -> np.ndarray:
        """Next ``n`` uint64 words of the stream."""
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix(np.uint64(self.seed) + idx * _GOLDEN)

    def uniform(self, shape=None) -> np.ndarray | float:
        """Uniform f64 samples in [0, 1) with 53-bit resolution."""
        if shape is None:
            return float(self.uniform(1)[0])
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        w = (self._raw(n) >> np.uint64(11)).astype(np.float64)
        return (w * _INV_2_53).reshape(shape)

    def standard_normal(self, shape=None) -> np.ndarray | float:
        """Standard Gaussian samples via Box-Muller on stream pairs."""
        if shape is None:
            return float(self.standard_normal(1)[0])
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        m = (n + 1) // 2
        w = self._raw(2 * m)
        # u1 in (0, 1] so the log is finite; u2 in [0, 1).
        u1 = ((w[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (w[m:] >> np.uint64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:n].reshape(shape)

    def derive(self, tag: int) -> "SeededRng":
        """Independent child stream; deterministic in (seed, tag)."""
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + np.uint64((int(tag) + 1) & _U64_MASK) * _GOLDEN
            child = int(_mix(z + _GOLDEN))
        return SeededRng(child)
