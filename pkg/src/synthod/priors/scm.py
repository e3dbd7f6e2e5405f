"""Structural causal models materialized as sparse layered MLPs.

Every node is a variable. Layer 0 holds exogenous inputs; a node in layer
l > 0 takes ``a(sum_i w_i * parent_i + eps)`` over its unmasked parents in
layer l - 1. A dataset reads ``d`` selected nodes as its features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..core import ConfigError, GenerationStalled, LabeledDataset, SeedPath, uniform_int

ACTIVATIONS = {
    "relu": lambda z: np.maximum(z, 0.0),
    "tanh": np.tanh,
    "sigmoid": expit,
    "identity": lambda z: z,
}


@dataclass(frozen=True)
class ScmConfig:
    depth_range: tuple[int, int] = (3, 5)
    width_range: tuple[int, int] = (20, 40)
    drop_range: tuple[float, float] = (0.4, 0.6)
    d_range: tuple[int, int] = (2, 100)
    activations: tuple[str, ...] = ("relu", "tanh", "sigmoid")
    s_range: tuple[float, float] = (5.0, 10.0)
    p_break: float = 0.1
    p_flip: float = 0.1
    contamination_range: tuple[float, float] = (0.02, 0.2)
    # "features" perturbs one of the selected nodes, "all" any node of the graph
    measurement_pool: str = "features"
    max_graph_retries: int = 100
    max_perturb_retries: int = 100
    allow_noise_only: bool = False

    def __post_init__(self):
        if not 1 <= self.depth_range[0] <= self.depth_range[1]:
            raise ConfigError(f"depth_range {self.depth_range} invalid")
        if not 1 <= self.width_range[0] <= self.width_range[1]:
            raise ConfigError(f"width_range {self.width_range} invalid")
        if not 0 <= self.drop_range[0] <= self.drop_range[1] <= 1:
            raise ConfigError(f"drop_range {self.drop_range} outside [0, 1]")
        if not 1 <= self.d_range[0] <= self.d_range[1] <= 100:
            raise ConfigError(f"d_range {self.d_range} outside [1, 100]")
        bad = set(self.activations) - set(ACTIVATIONS)
        if not self.activations or bad:
            raise ConfigError(f"unknown activations {sorted(bad)}")
        if not 1 <= self.s_range[0] <= self.s_range[1]:
            raise ConfigError(f"s_range {self.s_range} invalid")
        for name in ("p_break", "p_flip"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} outside [0, 1]")
        if self.p_break + self.p_flip > 1:
            raise ConfigError("p_break + p_flip must be <= 1")
        if not 0 <= self.contamination_range[0] <= self.contamination_range[1] < 1:
            raise ConfigError(f"contamination_range {self.contamination_range} invalid")
        if self.measurement_pool not in ("features", "all"):
            raise ConfigError(f"unknown measurement_pool {self.measurement_pool!r}")


@dataclass(frozen=True)
class ScmGraph:
    """Layered DAG. ``weights[l]`` maps layer l to layer l + 1 and already
    includes the edge mask (dropped edges are exactly zero)."""

    sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    mask: tuple[np.ndarray, ...]
    activation: str
    features: np.ndarray  # global node ids, length d
    target: int
    noise_std: np.ndarray = field(default=None)  # per node

    def __post_init__(self):
        if self.noise_std is None:
            object.__setattr__(self, "noise_std", np.ones(self.n_nodes))
        if len(set(self.features.tolist())) != len(self.features):
            raise ConfigError("selected feature nodes must be distinct")

    @property
    def n_nodes(self) -> int:
        return int(sum(self.sizes))

    @property
    def d(self) -> int:
        return len(self.features)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def layer_of(self, node: int) -> tuple[int, int]:
        layer = int(np.searchsorted(self.offsets, node, side="right") - 1)
        return layer, node - int(self.offsets[layer])

    def adjacency(self) -> np.ndarray:
        """Global weighted adjacency, ``A[i, j]`` = weight of edge i -> j."""
        A = np.zeros((self.n_nodes, self.n_nodes))
        off = self.offsets
        for l, w in enumerate(self.weights):
            A[off[l]:off[l + 1], off[l + 1]:off[l + 2]] = w
        return A

    def descendants(self, sources, weights=None) -> np.ndarray:
        """Boolean mask of nodes reachable from ``sources`` (sources included)
        along nonzero edges of ``weights`` (defaults to the graph's own)."""
        weights = self.weights if weights is None else weights
        off = self.offsets
        hit = np.zeros(self.n_nodes, dtype=bool)
        hit[np.asarray(sources, dtype=int)] = True
        for l, w in enumerate(weights):
            cur = hit[off[l]:off[l + 1]]
            if cur.any():
                hit[off[l + 1]:off[l + 2]] |= (w[cur] != 0).any(axis=0)
        return hit

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "activation": self.activation,
            "features": self.features.tolist(),
            "target": self.target,
        }


def _perturbable(g: ScmGraph) -> bool:
    """True when some selected feature has a live incoming edge, so an edge
    perturbation can reach it."""
    has_parent = np.concatenate([np.zeros(g.sizes[0], bool)]
                                + [(w != 0).any(axis=0) for w in g.weights])
    return bool(has_parent[g.features].any())


def _connected(sizes, mask) -> np.ndarray:
    """Nodes with at least one parent or child after masking."""
    deg = [np.zeros(s, dtype=bool) for s in sizes]
    for l, m in enumerate(mask):
        deg[l] |= m.any(axis=1)
        deg[l + 1] |= m.any(axis=0)
    return np.concatenate(deg)


def sample_scm(cfg: ScmConfig, seed: SeedPath, d: int | None = None) -> ScmGraph:
    """Draw a layered graph, then ``d`` feature nodes and one target node.

    Only nodes touching at least one surviving edge are eligible unless
    ``cfg.allow_noise_only`` is set. The graph is redrawn when too few nodes
    are eligible.
    """
    rng = seed.rng()
    if d is None:
        d = uniform_int(rng, *cfg.d_range)
    for _ in range(cfg.max_graph_retries):
        depth = uniform_int(rng, *cfg.depth_range)
        sizes = tuple(uniform_int(rng, *cfg.width_range) for _ in range(depth))
        drop = float(rng.uniform(*cfg.drop_range))
        act = cfg.activations[int(rng.integers(len(cfg.activations)))]
        weights, masks = [], []
        for l in range(depth - 1):
            w = rng.standard_normal((sizes[l], sizes[l + 1]))
            m = rng.random((sizes[l], sizes[l + 1])) >= drop
            weights.append(np.where(m, w, 0.0))
            masks.append(m)
        n_nodes = sum(sizes)
        eligible = np.ones(n_nodes, bool) if cfg.allow_noise_only else _connected(sizes, masks)
        pool = np.flatnonzero(eligible)
        if len(pool) < d + 1:
            continue
        picks = rng.choice(pool, size=d + 1, replace=False)
        return ScmGraph(
            sizes=sizes,
            weights=tuple(weights),
            mask=tuple(masks),
            activation=act,
            features=np.asarray(picks[:d], dtype=int),
            target=int(picks[d]),
        )
    raise GenerationStalled(
        f"no graph with {d + 1} eligible nodes after {cfg.max_graph_retries} draws"
    )


def _propagate(g: ScmGraph, weights, noise: np.ndarray) -> np.ndarray:
    """All node values given a full ``n x n_nodes`` noise matrix."""
    act = ACTIVATIONS[g.activation]
    off = g.offsets
    vals = np.empty_like(noise)
    vals[:, off[0]:off[1]] = noise[:, off[0]:off[1]]
    for l, w in enumerate(weights):
        z = vals[:, off[l]:off[l + 1]] @ w + noise[:, off[l + 1]:off[l + 2]]
        vals[:, off[l + 1]:off[l + 2]] = act(z)
    return vals


def _noise(g: ScmGraph, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((n, g.n_nodes)) * g.noise_std


def forward_sample(g: ScmGraph, n: int, seed: SeedPath, return_all: bool = False) -> np.ndarray:
    """Inlier draws read at the selected feature nodes."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    vals = _propagate(g, g.weights, _noise(g, n, seed.rng()))
    return vals if return_all else vals[:, g.features]


def measurement_outliers(g: ScmGraph, n: int, s: float, seed: SeedPath,
                         pool: str = "features", return_nodes: bool = False):
    """Per row, one node gets exogenous noise with variance ``s`` instead of its own."""
    rng = seed.rng()
    candidates = g.features if pool == "features" else np.arange(g.n_nodes)
    nodes = candidates[rng.integers(len(candidates), size=n)]
    eps = rng.standard_normal((n, g.n_nodes))
    noise = eps * g.noise_std
    rows = np.arange(n)
    noise[rows, nodes] = eps[rows, nodes] * np.sqrt(s)
    x = _propagate(g, g.weights, noise)[:, g.features]
    return (x, nodes) if return_nodes else x


def perturb_edges(g: ScmGraph, p_break: float, p_flip: float, rng: np.random.Generator):
    """Break (zero) or flip (negate) each existing edge independently.

    Returns the new weight tuple and the global ids of heads of edges whose
    weight actually changed.
    """
    off = g.offsets
    new, heads = [], []
    for l, w in enumerate(g.weights):
        r = rng.random(w.shape)
        brk = r < p_break
        flp = (r >= p_break) & (r < p_break + p_flip)
        w2 = np.where(brk, 0.0, np.where(flp, -w, w))
        new.append(w2)
        changed = (w2 != w).any(axis=0)
        heads.extend((off[l + 1] + np.flatnonzero(changed)).tolist())
    return tuple(new), np.asarray(heads, dtype=int)


def structural_outliers(g: ScmGraph, n: int, p_break: float = 0.1, p_flip: float = 0.1,
                        seed: SeedPath | None = None, max_retries: int = 100,
                        return_weights: bool = False):
    """Draw ``n`` points through one perturbed copy of the mechanism.

    The perturbation is redrawn until some selected feature node lies
    downstream of a changed edge.
    """
    rng = (seed or SeedPath(0)).rng()
    feats = np.zeros(g.n_nodes, dtype=bool)
    feats[g.features] = True
    for _ in range(max_retries):
        weights, heads = perturb_edges(g, p_break, p_flip, rng)
        if len(heads) == 0:
            continue
        # affected = heads plus everything they still reach in either mechanism
        reach = g.descendants(heads) | g.descendants(heads, weights)
        if (reach & feats).any():
            x = _propagate(g, weights, _noise(g, n, rng))[:, g.features]
            return (x, weights) if return_weights else x
    raise GenerationStalled(
        f"no edge perturbation reached a selected feature in {max_retries} draws"
    )


def generate_scm_dataset(cfg: ScmConfig, archetype: str, n_in: int, n_out: int,
                         seed: SeedPath, d: int | None = None) -> LabeledDataset:
    if archetype not in ("measurement", "structural"):
        raise ValueError(f"unknown SCM archetype {archetype!r}")
    if n_in < 0 or n_out < 0 or n_in + n_out == 0:
        raise ValueError("counts must be >= 0 and not both zero")
    g = sample_scm(cfg, seed.child("graph"), d=d)
    if archetype == "structural" and n_out:
        # features drawn only from root nodes can never be perturbed; redraw
        attempt = 0
        while not _perturbable(g):
            attempt += 1
            if attempt >= cfg.max_graph_retries:
                raise GenerationStalled(
                    f"no graph with a perturbable feature after {attempt} draws")
            g = sample_scm(cfg, seed.child("graph", attempt), d=d)
    s = float(seed.child("hyper").rng().uniform(*cfg.s_range))
    x_in = forward_sample(g, n_in, seed.child("inliers")) if n_in else np.zeros((0, g.d))
    if n_out == 0:
        x_out = np.zeros((0, g.d))
    elif archetype == "measurement":
        x_out = measurement_outliers(g, n_out, s, seed.child("outliers"), cfg.measurement_pool)
    else:
        x_out = structural_outliers(g, n_out, cfg.p_break, cfg.p_flip, seed.child("outliers"),
                                    cfg.max_perturb_retries)
    hyper = {**g.to_dict(), "p_break": cfg.p_break, "p_flip": cfg.p_flip}
    if archetype == "measurement":
        hyper["s"] = s
    meta = {"prior": "scm", "archetype": archetype, "seed": seed.to_list(), "hyper": hyper}
    return LabeledDataset.from_parts(x_in, x_out, meta)
