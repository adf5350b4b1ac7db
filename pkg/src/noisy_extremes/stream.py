"""Counter-based random streams.

Draw number ``c`` of stream ``(seed, stream_id)`` is a pure function of the
triple: word ``c & 1`` of the Threefry-2x64-20 block keyed by
``(seed, stream_id)`` at counter ``(c >> 1, 0)``, converted to a double as
``(word >> 11) * 2**-53``. Parallel trials therefore need no coordination:
trial ``t`` simply uses its own ``stream_id``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ._core import _fallback, kernels

MASK64 = (1 << 64) - 1


def derive_stream_id(*labels) -> int:
    """Stable 64-bit id for a tuple of labels (strings or integers)."""
    text = "\x1f".join(str(label) for label in labels).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def trial_stream_ids(base: int, count: int) -> np.ndarray:
    """Stream ids ``base, base + 1, ...`` (mod 2**64) for ``count`` trials."""
    return np.uint64(base & MASK64) + np.arange(count, dtype=np.uint64)


@dataclass
class RandomStream:
    """Position in a counter-based stream.

    The object is a cursor: drawing advances ``counter``. Use :meth:`copy`
    before handing a stream to another worker.
    """

    seed: int
    stream_id: int
    counter: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= MASK64 and 0 <= self.stream_id <= MASK64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        if self.counter < 0:
            raise ValueError("counter must be non-negative")

    @classmethod
    def derive(cls, seed: int, *labels) -> "RandomStream":
        return cls(seed, derive_stream_id(*labels))

    def copy(self) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id, self.counter)

    def uniforms(self, n: int) -> np.ndarray:
        out = kernels.uniforms(self.seed, self.stream_id, self.counter, n)
        self.counter += n
        return out

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit words."""
        c = np.uint64(self.counter) + np.arange(n, dtype=np.uint64)
        self.counter += n
        return _fallback.random_raw(self.seed, np.uint64(self.stream_id), c)
