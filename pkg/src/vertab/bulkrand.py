"""Vectorized counter-based random draws for ensemble training.

The scalar stream in oplang.rng steps its state by a fixed increment and
mixes, so output i of a stream seeded with s is a pure function of
s + (i+1) * GAMMA.  That makes bulk generation embarrassingly parallel:
build the counter array, mix once with numpy.  bulk_u64 reproduces the
scalar stream exactly, which the tests pin down.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def bulk_u64(state: int, count: int, offset: int = 0) -> np.ndarray:
    """Outputs offset..offset+count-1 of the scalar stream starting at state."""
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(state & 0xFFFFFFFFFFFFFFFF) + idx * GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def bulk_indices(state: int, count: int, n: int, offset: int = 0) -> np.ndarray:
    """``count`` draws from range(n), multiply-shift mapped.

    Deterministic and nearly uniform (bias below 2**-53 for any n that
    fits training data); used for bootstrap resampling.
    """
    u = bulk_u64(state, count, offset)
    return ((u >> np.uint64(11)).astype(np.float64) * (2.0 ** -53) * n).astype(np.int64)


def feature_keys(state: int, n_nodes: int, n_features: int, offset: int = 0) -> np.ndarray:
    """A (n_nodes, n_features) array of random sort keys for per-node
    feature subsampling."""
    u = bulk_u64(state, n_nodes * n_features, offset)
    return u.reshape(n_nodes, n_features)
