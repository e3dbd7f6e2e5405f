"""Baseline detector accuracy on freshly generated synthetic datasets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SeedPath
from .detectors.iforest import IForestConfig, iforest_fit, iforest_score
from .detectors.knn import KnnConfig, knn_score_avg
from .evalkit import auroc
from .priors import ARCHETYPES, PriorConfigs, draw_dataset


@dataclass(frozen=True)
class BaselineProtocol:
    n_datasets: int = 50
    n_in: int = 1000
    context_fraction: float = 0.5
    standardize: bool = True
    knn: KnnConfig = KnnConfig()
    iforest: IForestConfig = IForestConfig()


def standardize(context: np.ndarray, query: np.ndarray):
    """Z-score both sets with context statistics; constant columns are left centred."""
    mu = context.mean(axis=0)
    sd = context.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (context - mu) / sd, (query - mu) / sd


def score_dataset(ds, seed: SeedPath, proto: BaselineProtocol = BaselineProtocol()) -> dict:
    ctx, qry, y = ds.split_context(seed.child("split"), proto.context_fraction)
    if proto.standardize:
        ctx, qry = standardize(ctx, qry)
    forest = iforest_fit(ctx, proto.iforest, seed.child("iforest"))
    return {
        "knn": auroc(knn_score_avg(ctx, qry, proto.knn), y),
        "iforest": auroc(iforest_score(forest, qry), y),
    }


def run_baselines(archetype: str, seed: SeedPath | int = 0,
                  proto: BaselineProtocol = BaselineProtocol(),
                  cfgs: PriorConfigs = PriorConfigs()) -> dict:
    """Per-dataset AUROCs of kNN and iForest for one archetype."""
    root = SeedPath.coerce(seed).child(archetype)
    rows = []
    for i in range(proto.n_datasets):
        s = root.child(i)
        ds = draw_dataset(archetype, s, n_in=proto.n_in, cfgs=cfgs)
        rows.append({"d": ds.d, "contamination": ds.meta["contamination"],
                     **score_dataset(ds, s.child("detect"), proto)})
    knn = np.array([r["knn"] for r in rows])
    ifo = np.array([r["iforest"] for r in rows])
    return {
        "archetype": archetype,
        "knn_mean": float(knn.mean()),
        "knn_std": float(knn.std()),
        "iforest_mean": float(ifo.mean()),
        "iforest_std": float(ifo.std()),
        "datasets": rows,
    }


def run_all(seed: int = 0, proto: BaselineProtocol = BaselineProtocol(),
            archetypes=ARCHETYPES) -> dict:
    return {a: run_baselines(a, seed, proto) for a in archetypes}


def heldout_auroc(learner, archetypes=ARCHETYPES, d_range=(2, 20), n_datasets: int = 20,
                  n_context: int = 200, n_query: int = 200, seed: SeedPath | int = 0,
                  cfgs: PriorConfigs = PriorConfigs()) -> dict[str, float]:
    """Mean AUROC of ``learner.predict`` on fresh datasets, per archetype."""
    from .core import uniform_int
    from .curriculum import make_task

    root = SeedPath.coerce(seed).child("heldout")
    out = {}
    for a in archetypes:
        vals = []
        for i in range(n_datasets):
            s = root.child(a, i)
            d = uniform_int(s.child("d").rng(), *d_range)
            task = make_task(a, d, s, n_context, n_query, cfgs)
            vals.append(auroc(learner.predict(task.context, task.query), task.labels))
        out[a] = float(np.mean(vals))
    return out
