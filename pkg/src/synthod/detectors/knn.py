"""Brute-force k-nearest-neighbour distance scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import DataError

DEFAULT_KS = (5, 10, 20, 50)


@dataclass(frozen=True)
class KnnConfig:
    ks: tuple[int, ...] = DEFAULT_KS

    def __post_init__(self):
        if not self.ks or min(self.ks) < 1:
            raise ValueError(f"k values must be >= 1, got {self.ks}")


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # direct differences: exact zeros for duplicates, no cancellation
    diff = a[:, None, :] - b[None, :, :]
    return np.sum(diff * diff, axis=-1)


def kth_distances(context, query, ks, max_cells: int = 2**22) -> np.ndarray:
    """Distances from each query row to its k-th nearest context row, one column per k."""
    context = np.atleast_2d(np.asarray(context, dtype=float))
    query = np.atleast_2d(np.asarray(query, dtype=float))
    ks = [int(k) for k in ks]
    n = len(context)
    if max(ks) > n:
        raise DataError(f"k={max(ks)} exceeds context size {n}")
    out = np.empty((len(query), len(ks)))
    kidx = np.array(ks) - 1
    block = max(1, max_cells // max(1, n * context.shape[1]))
    for start in range(0, len(query), block):
        q = query[start:start + block]
        d2 = _sq_dists(q, context)
        part = np.partition(d2, kidx, axis=1)[:, kidx]
        out[start:start + block] = np.sqrt(part)
    return out


def knn_score(context, query, k: int = 5) -> np.ndarray:
    """Euclidean distance from each query point to its k-th nearest context point."""
    return kth_distances(context, query, [k])[:, 0]


def knn_score_avg(context, query, cfg: KnnConfig = KnnConfig()) -> np.ndarray:
    """Mean of k-th neighbour distances over ``cfg.ks`` (k capped at context size)."""
    n = len(np.atleast_2d(context))
    ks = sorted({min(k, n) for k in cfg.ks})
    return kth_distances(context, query, ks).mean(axis=1)
