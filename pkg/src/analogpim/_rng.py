"""Deterministic named RNG streams.

Every random draw in the suite flows from one global seed through named
sub-streams, so results are reproducible and independent of evaluation
order (parallel and serial runs consume identical streams).
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_to_ints(key) -> tuple[int, ...]:
    if isinstance(key, (int, np.integer)):
        return (int(key) & 0xFFFFFFFF,)
    digest = hashlib.blake2b(str(key).encode(), digest_size=8).digest()
    word = int.from_bytes(digest, "little")
    return (word & 0xFFFFFFFF, word >> 32)


def substream(seed: int, *keys) -> np.random.Generator:
    """Generator for the sub-stream named by ``keys`` under ``seed``."""
    spawn: list[int] = []
    for key in keys:
        spawn.extend(_key_to_ints(key))
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(spawn))
    return np.random.Generator(np.random.PCG64(seq))
