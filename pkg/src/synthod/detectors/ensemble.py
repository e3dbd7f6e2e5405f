"""Score averaging over random context-row and feature-column subsets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from ..core import SeedPath


@dataclass(frozen=True)
class EnsembleConfig:
    n_members: int = 50
    context_cap: int = 1000
    dim_cap: int = 100

    def __post_init__(self):
        if self.n_members < 1 or self.context_cap < 1 or self.dim_cap < 1:
            raise ValueError("n_members, context_cap and dim_cap must be >= 1")


def rank_normalize(scores) -> np.ndarray:
    """Map scores to [0, 1] by mean rank; a constant vector maps to 0.5."""
    scores = np.asarray(scores, dtype=float)
    if len(scores) == 1 or np.all(scores == scores[0]):
        return np.full(len(scores), 0.5)
    return (rankdata(scores) - 1) / (len(scores) - 1)


def member_score(scorer: Callable, context, query, cfg: EnsembleConfig,
                 seed: SeedPath, member: int) -> np.ndarray:
    rng = seed.child(member).rng()
    n, d = context.shape
    rows = np.sort(rng.choice(n, size=min(n, cfg.context_cap), replace=False))
    cols = np.sort(rng.choice(d, size=min(d, cfg.dim_cap), replace=False))
    return rank_normalize(scorer(context[np.ix_(rows, cols)], query[:, cols]))


def ensemble_score(scorer: Callable, context, query, cfg: EnsembleConfig = EnsembleConfig(),
                   seed: SeedPath | int = 0) -> np.ndarray:
    """Average rank-normalized member scores; ``scorer(context, query) -> scores``."""
    context = np.atleast_2d(np.asarray(context, dtype=float))
    query = np.atleast_2d(np.asarray(query, dtype=float))
    seed = SeedPath.coerce(seed)
    total = np.zeros(len(query))
    for m in range(cfg.n_members):
        total += member_score(scorer, context, query, cfg, seed, m)
    return total / cfg.n_members
