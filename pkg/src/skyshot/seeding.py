"""Single-seed determinism: every stochastic component derives its generator
from the run seed plus a stable component tag."""

from __future__ import annotations

import zlib

import numpy as np


def rng_for(seed: int, tag: str) -> np.random.Generator:
    """Generator seeded from (run seed, component tag).

    The tag enters through CRC32 so the derivation is stable across sessions
    and Python processes (unlike ``hash``).
    """
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([int(seed), zlib.crc32(tag.encode())]))
    )
