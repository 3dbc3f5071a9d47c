"""Derived random streams.

All randomness in a run flows from one user-supplied seed. Each consumer
(split, init, dropout, shuffling, ...) derives its own independent stream
from ``(seed, purpose-tag)`` so adding a new consumer never perturbs the
draws of existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derived_rng(seed: int, tag: str) -> np.random.Generator:
    """Deterministic generator for one purpose, independent across tags."""
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    tag_int = int.from_bytes(digest[:8], "little")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, tag_int])))
