"""Seeded random streams.

Every chain owns one :class:`numpy.random.Generator` backed by the Philox
counter-based bit generator.  Streams are keyed by ``(seed, name)`` so that
two chains with the same seed but different names never share variates.
Normal variates come from ``Generator.standard_normal`` (ziggurat method).
"""

from __future__ import annotations

import zlib

import numpy as np


def make_rng(seed: int, stream: str = "main") -> np.random.Generator:
    """Return the generator for the named stream of ``seed``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = zlib.crc32(stream.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(key,))
    return np.random.Generator(np.random.Philox(ss))
