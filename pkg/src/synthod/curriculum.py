"""Bandit curriculum over (dimension bin, prior) categories with loss-based filtering.

Each epoch fills a batch with datasets drawn from categories sampled by a
temperature softmax over category weights, scores every point with the
learner, rewards each category by the dispersion of its point losses, moves
the weights by an exponential moving average and trains on the lowest-loss
share of points given by a pacing schedule.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Protocol

import numpy as np

from .core import ConfigError, SeedPath, SynthError, uniform_int
from .priors import ARCHETYPES, PriorConfigs, contamination_range, generator

DIM_BINS = ((2, 21), (21, 40), (40, 59), (59, 78), (78, 101))
PACE_FUNCTIONS = ("log", "exp", "step", "linear", "root", "quadratic")
POLICIES = ("sec", "naive", "spl", "ac")


class Learner(Protocol):
    def features(self, context, query) -> np.ndarray: ...
    def losses(self, X, y) -> np.ndarray: ...
    def update(self, X, y) -> None: ...
    def predict(self, context, query) -> np.ndarray: ...


class GenerationFailed(SynthError, RuntimeError):
    """A dataset generator raised; the message names the category."""


# ---------------------------------------------------------------- state


@dataclass
class CategoryState:
    priors: tuple[str, ...] = ARCHETYPES
    bins: tuple[tuple[int, int], ...] = DIM_BINS
    tau: float = 0.5
    gamma: float = 0.1
    weights: np.ndarray = None
    t: int = 0

    def __post_init__(self):
        self.priors = tuple(self.priors)
        self.bins = tuple(tuple(int(v) for v in b) for b in self.bins)
        for lo, hi in self.bins:
            if not lo < hi:
                raise ConfigError(f"empty dimension bin [{lo}, {hi})")
        edges = sorted(self.bins)
        if any(a[1] > b[0] for a, b in zip(edges, edges[1:])):
            raise ConfigError("dimension bins overlap")
        if self.tau <= 0:
            raise ConfigError("temperature must be positive")
        if not 0 < self.gamma <= 1:
            raise ConfigError("EMA constant must be in (0, 1]")
        K = len(self.categories)
        if self.weights is None:
            self.weights = np.full(K, 1.0 / K)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (K,) or not np.all(np.isfinite(self.weights)):
            raise ConfigError("category weights must be finite, one per category")

    @property
    def categories(self) -> list[tuple[int, str]]:
        """Bin-major list of ``(bin index, prior)`` pairs."""
        return [(b, p) for b in range(len(self.bins)) for p in self.priors]

    def name(self, c: int) -> str:
        b, p = self.categories[c]
        lo, hi = self.bins[b]
        return f"{p}@[{lo},{hi})"

    def to_dict(self) -> dict:
        return {"priors": list(self.priors), "bins": [list(b) for b in self.bins], "tau": self.tau,
                "gamma": self.gamma, "weights": self.weights.tolist(), "t": self.t}

    @classmethod
    def from_dict(cls, d: dict) -> CategoryState:
        return cls(priors=tuple(d["priors"]), bins=tuple(tuple(b) for b in d["bins"]),
                   tau=d["tau"], gamma=d["gamma"], weights=np.array(d["weights"]), t=d["t"])


def softmax_probs(weights, tau: float) -> np.ndarray:
    z = np.asarray(weights, dtype=float) / tau
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def sample_category(state: CategoryState, rng: np.random.Generator,
                    probs: np.ndarray | None = None) -> tuple[int, int]:
    """Draw a category index from softmax(Q / tau), then a dimension uniformly in its bin."""
    p = softmax_probs(state.weights, state.tau) if probs is None else probs
    c = int(rng.choice(len(p), p=p))
    lo, hi = state.bins[state.categories[c][0]]
    return c, uniform_int(rng, lo, hi - 1)


# ---------------------------------------------------------------- rewards


def category_reward(losses) -> float:
    """Population variance of the losses of one category."""
    l = np.asarray(losses, dtype=float).ravel()
    if len(l) == 0:
        raise ValueError("domain error: category reward needs at least one loss")
    # shifting by one sample keeps equal losses exactly zero
    l = l - l[0]
    return float(np.mean((l - l.mean()) ** 2))


def binary_category_reward(correct) -> float:
    """Sum of absolute deviations of 0/1 correctness flags from their mean."""
    f = np.asarray(correct, dtype=float).ravel()
    if len(f) == 0:
        raise ValueError("domain error: binary reward needs at least one flag")
    return float(np.abs(f - f.mean()).sum())


def ema_update(state: CategoryState, rewards: dict[int, float], gamma: float | None = None) -> CategoryState:
    """Move the weights of the categories in ``rewards`` toward their reward."""
    g = state.gamma if gamma is None else gamma
    if not 0 < g <= 1:
        raise ValueError("EMA constant must be in (0, 1]")
    for c, r in rewards.items():
        # same as g * r + (1 - g) * Q, but exact at the fixed point r == Q
        state.weights[c] += g * (r - state.weights[c])
    return state


# ---------------------------------------------------------------- pacing


@dataclass(frozen=True)
class PaceConfig:
    function: str = "root"
    a: float = 0.8
    b: float = 0.2
    cap: float = 0.95

    def __post_init__(self):
        if self.function not in PACE_FUNCTIONS:
            raise ConfigError(f"unknown pace function {self.function!r}")
        if not 0 < self.a <= 1:
            raise ConfigError("pace a must be in (0, 1]")
        if not 0 <= self.b <= 1:
            raise ConfigError("pace b must be in [0, 1]")
        if not 0 < self.cap <= 1:
            raise ConfigError("filter cap must be in (0, 1]")


def pace_value(fn: str, N: float, t: float, T: float, a: float = 0.8, b: float = 0.2) -> float:
    """Unclamped schedule ``g_(a,b)(t)``: points to keep at step ``t`` of ``T``."""
    aT = a * T
    x = t / aT
    if fn == "log":
        return N * b + N * (1 - b) * (1 + 0.1 * math.log(x + math.exp(-10)))
    if fn == "exp":
        return N * b + N * (1 - b) / (math.exp(10) - 1) * (math.exp(10 * x) - 1)
    if fn == "step":
        return N * b + N * math.ceil(x * (1 - b))
    if fn == "linear":
        return N * b + N * (1 - b) * x
    if fn == "root":
        return N * b + N * (1 - b) * math.sqrt(x)
    if fn == "quadratic":
        return N * b + N * (1 - b) * x**2
    raise ConfigError(f"unknown pace function {fn!r}")


def pace(cfg: PaceConfig, N: int, t: float, T: float) -> int:
    """Keep count: the schedule clamped to ``[ceil((1 - cap) N), N]`` and rounded."""
    if not 0 <= t <= T:
        raise ValueError(f"step {t} outside [0, {T}]")
    lo = math.ceil((1 - cfg.cap) * N - 1e-9)
    g = pace_value(cfg.function, N, t, T, cfg.a, cfg.b)
    return int(min(N, max(lo, round(min(max(g, lo), N)))))


def filter_by_loss(losses, keep: int) -> np.ndarray:
    """Indices of the ``keep`` smallest losses; equal losses keep index order."""
    losses = np.asarray(losses, dtype=float)
    if not 0 <= keep <= len(losses):
        raise ValueError(f"keep={keep} outside [0, {len(losses)}]")
    return np.sort(np.argsort(losses, kind="stable")[:keep])


# ---------------------------------------------------------------- epoch loop


@dataclass
class Task:
    """One dataset as the learner sees it."""

    category: int
    d: int
    context: np.ndarray
    query: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class SecConfig:
    policy: str = "sec"
    batch_points: int = 2000
    n_query: int = 200
    n_context: int = 200
    pace: PaceConfig = PaceConfig()
    epochs: int = 200

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.batch_points < 1 or self.n_query < 1 or self.n_context < 2:
            raise ConfigError("batch_points, n_query must be >= 1 and n_context >= 2")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


def make_task(archetype: str, d: int, seed: SeedPath, n_context: int, n_query: int,
              cfgs: PriorConfigs = PriorConfigs(), category: int = -1) -> Task:
    """Generate a dataset and split it into a clean context and a labelled query."""
    r = float(seed.child("contamination").rng().uniform(*contamination_range(archetype, cfgs)))
    n_out = max(1, int(round(r * n_query)))
    n_in = n_context + n_query - n_out
    ds = generator(archetype, cfgs)(n_in, n_out, seed.child("data"), d=d)
    ctx, qry, y = ds.split_context(seed.child("split"), context_fraction=n_context / n_in)
    return Task(category, d, ctx, qry, y)


def _task_worker(args):
    archetype, d, seed, n_context, n_query, cfgs, category = args
    try:
        return make_task(archetype, d, seed, n_context, n_query, cfgs, category)
    except Exception as exc:  # re-raised with attribution by the caller
        return exc


TaskSampler = Callable[[int, int, SeedPath], Task]


def plan_batch(state: CategoryState, cfg: SecConfig, seed: SeedPath) -> list[tuple[int, int, int]]:
    """Categories, dimensions and point counts of the datasets making up one batch.

    Every dataset contributes ``n_query`` points except the last, which is
    truncated so the batch holds exactly ``batch_points`` points.
    """
    rng = seed.child("categories").rng()
    K = len(state.categories)
    probs = (softmax_probs(state.weights, state.tau) if cfg.policy in ("sec", "ac")
             else np.full(K, 1.0 / K))
    plan, have = [], 0
    while have < cfg.batch_points:
        c, d = sample_category(state, rng, probs)
        take = min(cfg.n_query, cfg.batch_points - have)
        plan.append((c, d, take))
        have += take
    return plan


def build_batch(state: CategoryState, cfg: SecConfig, seed: SeedPath,
                cfgs: PriorConfigs = PriorConfigs(), sampler: TaskSampler | None = None,
                jobs: int = 1) -> list[Task]:
    plan = plan_batch(state, cfg, seed)
    cats = state.categories
    if sampler is not None:
        tasks = [sampler(c, d, seed.child("slot", j)) for j, (c, d, _) in enumerate(plan)]
    else:
        args = [(cats[c][1], d, seed.child("slot", j), cfg.n_context, cfg.n_query, cfgs, c)
                for j, (c, d, _) in enumerate(plan)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                tasks = list(ex.map(_task_worker, args))
        else:
            tasks = [_task_worker(a) for a in args]
        for (c, d, _), t in zip(plan, tasks):
            if isinstance(t, Exception):
                raise GenerationFailed(f"category {state.name(c)} (d={d}): {t}") from t
    out = []
    for j, ((_, _, take), task) in enumerate(zip(plan, tasks)):
        if take < len(task.labels):
            keep = np.sort(seed.child("truncate", j).rng().choice(len(task.labels), take, replace=False))
            task = Task(task.category, task.d, task.context, task.query[keep], task.labels[keep])
        out.append(task)
    return out


def run_sec_epoch(state: CategoryState, learner: Learner, cfg: SecConfig, seed: SeedPath,
                  cfgs: PriorConfigs = PriorConfigs(), sampler: TaskSampler | None = None,
                  jobs: int = 1):
    """One curriculum step. Returns ``(state, learner, report)``; ``state`` is updated in place."""
    t = state.t + 1
    epoch_seed = seed.child("epoch", t)
    tasks = build_batch(state, cfg, epoch_seed, cfgs, sampler, jobs)
    X = np.vstack([learner.features(tk.context, tk.query) for tk in tasks])
    y = np.concatenate([tk.labels for tk in tasks]).astype(float)
    cat = np.concatenate([np.full(len(tk.labels), tk.category) for tk in tasks])
    losses = learner.losses(X, y)

    present = sorted(set(cat.tolist()))
    if cfg.policy == "ac":
        # hard categories first: reward is the mean loss magnitude
        rewards = {c: float(losses[cat == c].mean()) for c in present}
    else:
        rewards = {c: category_reward(losses[cat == c]) for c in present}
    if cfg.policy in ("sec", "ac"):
        ema_update(state, rewards)

    N = len(losses)
    if cfg.policy in ("sec", "spl"):
        keep = pace(cfg.pace, N, min(t, cfg.epochs), cfg.epochs)
    else:
        keep = N
    idx = filter_by_loss(losses, keep)
    learner.update(X[idx], y[idx])
    state.t = t

    counts = {c: sum(1 for tk in tasks if tk.category == c) for c in present}
    report = {
        "t": t,
        "categories": {
            state.name(c): {
                "reward": rewards.get(c),
                "weight": float(state.weights[c]),
                "datasets_sampled": counts.get(c, 0),
            }
            for c in range(len(state.categories))
        },
        "kept_fraction": keep / N,
        "mean_loss": float(losses.mean()),
    }
    return state, learner, report


def report_line(report: dict) -> str:
    return json.dumps(report, sort_keys=True)


def config_dict(cfg: SecConfig) -> dict:
    return asdict(cfg)
