"""Counter-based random streams keyed by ``(seed, *indices)``.

A stream depends only on its key, so work can be split across threads in any
order without changing the numbers drawn.
"""
from __future__ import annotations

import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Philox generator for the entropy tuple ``(seed, *keys)``."""
    if seed is None:
        raise ValueError("a seed is required for reproducible streams")
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(ss))
