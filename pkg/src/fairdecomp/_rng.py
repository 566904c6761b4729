"""Counter-based deterministic substreams (SplitMix64 mixing).

Monte Carlo draws in the estimator are keyed on (seed, unit index, arm), so
results are independent of iteration order and worker count.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = 0xFFFFFFFFFFFFFFFF


def _mix(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


def substream(*parts: int) -> int:
    """Fold integer parts into a single 64-bit stream key."""
    key = 0
    golden, m1, m2 = int(_GOLDEN), int(_MIX1), int(_MIX2)
    for p in parts:
        x = (key + golden * (p & _MASK)) & _MASK
        x = ((x ^ (x >> 30)) * m1) & _MASK
        x = ((x ^ (x >> 27)) * m2) & _MASK
        key = x ^ (x >> 31)
    return key


def index_draws(key: int, count: int, bound: int) -> np.ndarray:
    """`count` deterministic pseudo-uniform indices in [0, bound)."""
    if count == 0:
        return np.empty(0, dtype=np.intp)
    ctr = np.uint64(key) + _GOLDEN * np.arange(1, count + 1, dtype=np.uint64)
    return (_mix(ctr) % np.uint64(bound)).astype(np.intp)


def index_draw_matrix(keys: np.ndarray, count: int, bound: int) -> np.ndarray:
    """Per-row deterministic index draws; shape (len(keys), count)."""
    keys = np.asarray(keys, dtype=np.uint64)
    if count == 0:
        return np.empty((len(keys), 0), dtype=np.intp)
    ctr = keys[:, None] + _GOLDEN * np.arange(1, count + 1, dtype=np.uint64)[None, :]
    return (_mix(ctr) % np.uint64(bound)).astype(np.intp)
