"""Rank-count kernel dispatch: compiled extension when available, numpy otherwise.

Set FAIRPARETO_PURE=1 to force the numpy path (used by the benchmark and
to test both implementations against each other).
"""
from __future__ import annotations

import os

import numpy as np


def rank_counts_numpy(vectors: np.ndarray, identities: np.ndarray,
                      block: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Pure-numpy rank counts; identical contract to the compiled kernel.

    vectors: (n, d) float64. identities: (n,) int64 codes.
    Returns (ranks int64, excluded bool); excluded probes have no
    same-identity mate and their rank is meaningless.
    """
    vectors = np.ascontiguousarray(vectors, dtype=np.float64)
    identities = np.asarray(identities, dtype=np.int64)
    n = identities.shape[0]
    ranks = np.zeros(n, dtype=np.int64)
    excluded = np.zeros(n, dtype=bool)
    for start in range(0, n, block):
        stop = min(start + block, n)
        diff = vectors[start:stop, None, :] - vectors[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        same = identities[start:stop, None] == identities[None, :]
        rows = np.arange(start, stop)
        mate = same.copy()
        mate[np.arange(stop - start), rows] = False  # self is not a mate
        mate_d2 = np.where(mate, d2, np.inf).min(axis=1)
        blk_excluded = ~mate.any(axis=1)
        closer = (~same) & (d2 < mate_d2[:, None])
        ranks[start:stop] = closer.sum(axis=1)
        excluded[start:stop] = blk_excluded
    ranks[excluded] = 0
    return ranks, excluded


if os.environ.get("FAIRPARETO_PURE"):
    HAVE_COMPILED_KERNEL = False
    rank_counts = rank_counts_numpy
else:
    try:
        from fairpareto._rankcore import rank_counts as _compiled_rank_counts

        HAVE_COMPILED_KERNEL = True

        def rank_counts(vectors, identities, block=256):
            vectors = np.ascontiguousarray(vectors, dtype=np.float64)
            identities = np.ascontiguousarray(identities, dtype=np.int64)
            return _compiled_rank_counts(vectors, identities)

    except ImportError:  # extension not built; numpy path is fully equivalent
        HAVE_COMPILED_KERNEL = False
        rank_counts = rank_counts_numpy
