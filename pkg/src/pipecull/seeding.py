"""Deterministic RNG derivation.

Every random decision in the package flows from a master seed through
``rng_for(master, *tokens)``.  Token hashing uses SHA-256, so derived
streams do not depend on ``PYTHONHASHSEED``, platform, or process.
"""

from __future__ import annotations

import hashlib

import numpy as np


def seed_sequence(*tokens: object) -> np.random.SeedSequence:
    h = hashlib.sha256()
    for t in tokens:
        h.update(str(t).encode("utf-8"))
        h.update(b"\x1f")
    words = np.frombuffer(h.digest(), dtype=np.uint32)
    return np.random.SeedSequence(words.tolist())


def rng_for(*tokens: object) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(*tokens))


def int_seed(*tokens: object) -> int:
    """A plain integer seed derived from the same token stream."""
    h = hashlib.sha256()
    for t in tokens:
        h.update(str(t).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big")


def as_rng(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
