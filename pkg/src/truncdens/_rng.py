"""Seeded, splittable random streams.

Every stream is a Philox (counter-based) generator keyed by
``(seed, tag, *index)`` so that results never depend on call order.
"""

from __future__ import annotations

import zlib

import numpy as np


def derive_rng(seed: int, tag: str, *index: int) -> np.random.Generator:
    key = (zlib.crc32(tag.encode("utf-8")),) + tuple(int(i) for i in index)
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
