"""A small trainable scorer used to drive the curriculum loop.

Each query point is described relative to its context: coordinates are
whitened with the context mean and covariance, squared, sorted in decreasing
order, log-compressed and padded to a fixed width. A one-hidden-layer network
maps that description to an outlier probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import SeedPath, SynthError, pad_and_rescale


class TrainingDiverged(SynthError, FloatingPointError):
    """Loss or parameters became non-finite."""


@dataclass(frozen=True)
class LearnerConfig:
    input_dim: int = 100
    hidden: int = 64
    lr: float = 1e-3
    optimizer: str = "adam"  # or "sgd"
    batch_size: int = 64
    steps_per_update: int | None = None  # None = one pass over the kept points
    ridge: float = 1e-3
    clip: float = 1e6
    zero_init: bool = False

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden < 1 or self.lr <= 0:
            raise ValueError("input_dim, hidden and lr must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def _describe(z: np.ndarray, clip: float) -> np.ndarray:
    sq = np.minimum(z * z, clip)
    return np.log1p(-np.sort(-sq, axis=1))


def context_features(context, query, D: int = 100, ridge: float = 1e-3,
                     clip: float = 1e6) -> np.ndarray:
    """Fixed-width description of each query point relative to the context.

    The sorted squared whitened coordinates are centred and scaled by the
    same description of the context points, so a typical inlier maps near
    zero whatever the dataset.
    """
    context = np.atleast_2d(np.asarray(context, dtype=float))
    query = np.atleast_2d(np.asarray(query, dtype=float))
    mu = context.mean(axis=0)
    cov = np.atleast_2d(np.cov(context, rowvar=False)) if len(context) > 1 else np.eye(context.shape[1])
    scale = max(float(np.trace(cov)) / cov.shape[0], 1e-12)
    evals, evecs = np.linalg.eigh(cov / scale + ridge * np.eye(cov.shape[0]))
    proj = evecs / np.sqrt(evals * scale)
    ref = _describe((context - mu) @ proj, clip)
    desc = _describe((query - mu) @ proj, clip)
    sd = ref.std(axis=0)
    desc = (desc - ref.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    # the padding seed only matters when d > D
    return pad_and_rescale(desc, D, seed=SeedPath(0, (desc.shape[1],)))


def bce(p, y) -> np.ndarray:
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return -(y * np.log(p) + (1 - y) * np.log1p(-p))


@dataclass
class ReferenceLearner:
    """Implements the learner interface used by the curriculum loop:
    ``features``, ``losses``, ``update`` and ``predict``."""

    cfg: LearnerConfig = field(default_factory=LearnerConfig)
    seed: SeedPath = field(default_factory=lambda: SeedPath(0))
    params: dict = field(default=None)
    opt_state: dict = field(default=None)
    n_updates: int = 0

    def __post_init__(self):
        if self.params is None:
            self.params = init_params(self.cfg, self.seed.child("init"))
        if self.opt_state is None:
            self.opt_state = {k: (np.zeros_like(v), np.zeros_like(v)) for k, v in self.params.items()}

    # -- interface -------------------------------------------------------

    def features(self, context, query) -> np.ndarray:
        return context_features(context, query, self.cfg.input_dim, self.cfg.ridge, self.cfg.clip)

    def losses(self, X, y) -> np.ndarray:
        out = bce(forward(self.params, X)[0], np.asarray(y, dtype=float))
        if not np.all(np.isfinite(out)):
            raise TrainingDiverged("non-finite loss")
        return out

    def update(self, X, y) -> None:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if len(X) == 0:
            return
        rng = self.seed.child("update", self.n_updates).rng()
        bs = min(self.cfg.batch_size, len(X))
        order = rng.permutation(len(X))
        n_steps = self.cfg.steps_per_update or int(np.ceil(len(X) / bs))
        for step in range(n_steps):
            start = (step * bs) % len(X)
            idx = order[start:start + bs]
            _, grads = loss_and_grad(self.params, X[idx], y[idx])
            self._apply(grads)
        self.n_updates += 1
        if not all(np.all(np.isfinite(v)) for v in self.params.values()):
            raise TrainingDiverged("non-finite parameters after update")

    def predict(self, context, query) -> np.ndarray:
        return forward(self.params, self.features(context, query))[0]

    # -- state -----------------------------------------------------------

    def _apply(self, grads):
        lr = self.cfg.lr
        if self.cfg.optimizer == "sgd":
            for k, g in grads.items():
                self.params[k] -= lr * g
            return
        b1, b2, eps = 0.9, 0.999, 1e-8
        t = self.opt_state.setdefault("_t", 0) + 1
        self.opt_state["_t"] = t
        for k, g in grads.items():
            m, v = self.opt_state[k]
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            self.opt_state[k] = (m, v)
            self.params[k] -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)

    def state_dict(self) -> dict:
        st = {f"p_{k}": v.copy() for k, v in self.params.items()}
        for k, val in self.opt_state.items():
            if k == "_t":
                st["opt_t"] = np.array(val)
            else:
                st[f"m_{k}"], st[f"v_{k}"] = val[0].copy(), val[1].copy()
        st["n_updates"] = np.array(self.n_updates)
        return st

    def load_state_dict(self, st) -> None:
        self.params = {k[2:]: np.array(v, dtype=float) for k, v in st.items() if k.startswith("p_")}
        self.opt_state = {k: (np.array(st[f"m_{k}"]), np.array(st[f"v_{k}"])) for k in self.params}
        if "opt_t" in st:
            self.opt_state["_t"] = int(st["opt_t"])
        self.n_updates = int(st["n_updates"])


def init_params(cfg: LearnerConfig, seed: SeedPath) -> dict:
    D, H = cfg.input_dim, cfg.hidden
    if cfg.zero_init:
        return {"W1": np.zeros((D, H)), "b1": np.zeros(H), "w2": np.zeros(H), "b2": np.zeros(1)}
    rng = seed.rng()
    return {
        "W1": rng.standard_normal((D, H)) * np.sqrt(2.0 / (D + H)),
        "b1": np.zeros(H),
        # a zero read-out starts every prediction at 0.5, so early loss
        # filtering cannot lock in an arbitrary initial ranking
        "w2": np.zeros(H),
        "b2": np.zeros(1),
    }


def forward(params: dict, X):
    X = np.atleast_2d(X)
    h = np.tanh(X @ params["W1"] + params["b1"])
    logit = h @ params["w2"] + params["b2"][0]
    p = 1.0 / (1.0 + np.exp(-np.clip(logit, -500, 500)))
    return p, (X, h, logit)


def loss_and_grad(params: dict, X, y):
    """Mean binary cross-entropy and its gradient."""
    y = np.asarray(y, dtype=float)
    p, (X, h, logit) = forward(params, X)
    n = len(y)
    # numerically stable BCE on logits
    loss = float(np.mean(np.logaddexp(0, logit) - y * logit))
    dlogit = (p - y) / n
    dh = np.outer(dlogit, params["w2"]) * (1 - h * h)
    grads = {
        "W1": X.T @ dh,
        "b1": dh.sum(axis=0),
        "w2": h.T @ dlogit,
        "b2": np.array([dlogit.sum()]),
    }
    return loss, grads
