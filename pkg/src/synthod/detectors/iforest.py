"""Isolation forest over numpy arrays.

Trees are stored as flat arrays so scoring is a vectorized walk over all
query points at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import DataError, SeedPath

EULER_GAMMA = 0.5772156649015329


def avg_path_length(n) -> np.ndarray:
    """Expected path length of an unsuccessful BST search over ``n`` points."""
    n = np.asarray(n, dtype=float)
    out = np.zeros_like(n)
    big = n > 2
    out[n == 2] = 1.0
    nb = n[big]
    out[big] = 2.0 * (np.log(nb - 1.0) + EULER_GAMMA) - 2.0 * (nb - 1.0) / nb
    return out


@dataclass(frozen=True)
class IForestConfig:
    n_estimators: int = 100
    max_samples: int = 256
    max_features: float = 1.0

    def __post_init__(self):
        if self.n_estimators < 1 or self.max_samples < 1 or not 0 < self.max_features <= 1:
            raise ValueError("n_estimators, max_samples and max_features must be positive")


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray  # points reaching each node; used at leaves
    depth: np.ndarray
    features_used: np.ndarray


@dataclass
class IsolationForest:
    trees: list
    psi: int

    def score(self, query) -> np.ndarray:
        return iforest_score(self, query)


def _grow(X: np.ndarray, height_limit: int, rng: np.random.Generator) -> _Tree:
    feature, threshold, left, right, size, depth = [], [], [], [], [], []

    def new_node(n, dep):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(n)
        depth.append(dep)
        return len(feature) - 1

    root = new_node(len(X), 0)
    stack = [(root, np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        dep = depth[node]
        if dep >= height_limit or len(idx) <= 1:
            continue
        sub = X[idx]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if len(splittable) == 0:
            continue
        f = int(splittable[rng.integers(len(splittable))])
        t = float(rng.uniform(lo[f], hi[f]))
        go_left = sub[:, f] < t
        li = new_node(int(go_left.sum()), dep + 1)
        ri = new_node(int((~go_left).sum()), dep + 1)
        feature[node], threshold[node], left[node], right[node] = f, t, li, ri
        stack.append((li, idx[go_left]))
        stack.append((ri, idx[~go_left]))
    return _Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                 np.array(size), np.array(depth), np.arange(X.shape[1]))


def iforest_fit(context, cfg: IForestConfig = IForestConfig(),
                seed: SeedPath | int = 0) -> IsolationForest:
    X = np.atleast_2d(np.asarray(context, dtype=float))
    if X.shape[0] < 1:
        raise DataError("isolation forest needs a nonempty context")
    rng = SeedPath.coerce(seed).rng()
    psi = min(cfg.max_samples, len(X))
    height = max(1, math.ceil(math.log2(psi))) if psi > 1 else 1
    n_feat = max(1, int(round(cfg.max_features * X.shape[1])))
    trees = []
    for _ in range(cfg.n_estimators):
        rows = rng.choice(len(X), size=psi, replace=False)
        cols = np.sort(rng.choice(X.shape[1], size=n_feat, replace=False))
        tree = _grow(X[np.ix_(rows, cols)], height, rng)
        tree.features_used = cols
        trees.append(tree)
    return IsolationForest(trees, psi)


def _path_lengths(tree: _Tree, Q: np.ndarray) -> np.ndarray:
    Q = Q[:, tree.features_used]
    node = np.zeros(len(Q), dtype=int)
    active = tree.left[node] >= 0
    while active.any():
        idx = np.flatnonzero(active)
        nd = node[idx]
        go_left = Q[idx, tree.feature[nd]] < tree.threshold[nd]
        node[idx] = np.where(go_left, tree.left[nd], tree.right[nd])
        active[idx] = tree.left[node[idx]] >= 0
    return tree.depth[node] + avg_path_length(tree.size[node])


def iforest_score(forest: IsolationForest, query) -> np.ndarray:
    """Anomaly score ``2^(-E[h(x)] / c(psi))``; higher is more anomalous."""
    Q = np.atleast_2d(np.asarray(query, dtype=float))
    h = np.mean([_path_lengths(t, Q) for t in forest.trees], axis=0)
    c = float(avg_path_length(np.array([forest.psi]))[0])
    if c == 0:
        return np.full(len(Q), 0.5)
    return 2.0 ** (-h / c)
