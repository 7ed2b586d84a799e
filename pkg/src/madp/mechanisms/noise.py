"""Laplace noise sources.

Every mechanism draws noise through one of these objects, so a run can use an
ordinary seeded stream or a keyed oracle that hands out the same unit draw to
the same query in different runs (common random numbers for paired runs).
"""

import hashlib
import struct

import numpy as np


class StreamNoise:
    """Independent draws from a per-instance seeded generator."""

    def __init__(self, seed=None):
        self.rng = np.random.default_rng(seed)

    def laplace(self, scale, key=None):
        if scale == 0:
            return 0.0
        return float(self.rng.laplace(0.0, scale))


class KeyedNoise:
    """Deterministic unit-Laplace draw per ``key``, scaled on request.

    Two runs sharing a ``KeyedNoise`` seed see identical noise for identical
    keys, while each draw on its own is an exact Laplace sample.
    """

    def __init__(self, seed=0):
        self._salt = struct.pack("<q", int(seed) & 0x7FFFFFFFFFFFFFFF)

    def unit(self, key):
        h = hashlib.blake2b(key, digest_size=8, key=self._salt).digest()
        u = (int.from_bytes(h, "little") + 0.5) / 2.0**64
        # inverse cdf of Laplace(0, 1)
        if u < 0.5:
            return float(np.log(2.0 * u))
        return float(-np.log(2.0 * (1.0 - u)))

    def laplace(self, scale, key=None):
        if scale == 0:
            return 0.0
        if key is None:
            raise ValueError("keyed noise needs a key")
        return scale * self.unit(key)


def query_key(tag, q):
    return tag.encode() + b"|" + np.ascontiguousarray(q, dtype=float).tobytes()
