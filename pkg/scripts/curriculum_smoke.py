"""Train the reference learner with a curriculum policy, then score held-out
synthetic datasets per archetype.

Usage:
    python scripts/curriculum_smoke.py --policy sec --epochs 200
    python scripts/curriculum_smoke.py --policy naive --epochs 200 --out results/naive.json
"""

import argparse
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from synthod.benchmark import heldout_auroc
from synthod.core import SeedPath
from synthod.curriculum import POLICIES, CategoryState, SecConfig, run_sec_epoch
from synthod.detectors.learner import LearnerConfig, ReferenceLearner


@dataclass
class Config:
    policy: str = "sec"
    epochs: int = 200
    batch_points: int = 2000
    bins: tuple = ((2, 11), (11, 21))
    learner: LearnerConfig = field(default_factory=lambda: LearnerConfig(input_dim=20))
    learner_seed: int = 1
    data_seed: int = 7
    eval_seed: int = 3
    eval_datasets: int = 20
    log_every: int = 25
    out: Path = field(default_factory=lambda: Path("results/curriculum.json"))


def run(cfg: Config) -> dict:
    state = CategoryState(bins=cfg.bins)
    sec = SecConfig(policy=cfg.policy, batch_points=cfg.batch_points, epochs=cfg.epochs)
    learner = ReferenceLearner(cfg.learner, SeedPath(cfg.learner_seed))
    history = []
    t0 = time.time()
    for t in range(cfg.epochs):
        state, learner, rep = run_sec_epoch(state, learner, sec, SeedPath(cfg.data_seed))
        history.append({"epoch": t, "mean_loss": rep["mean_loss"]})
        if t % cfg.log_every == 0 or t == cfg.epochs - 1:
            print(f"epoch {t:4d} loss {rep['mean_loss']:.4f} {time.time() - t0:.0f}s", flush=True)
    train_s = time.time() - t0
    scores = heldout_auroc(learner, d_range=(cfg.bins[0][0], cfg.bins[-1][1] - 1),
                           n_datasets=cfg.eval_datasets, seed=cfg.eval_seed)
    for a, v in scores.items():
        print(f"held-out {a:22s} AUROC {v:.3f}")
    return {"train_seconds": train_s, "heldout_auroc": scores, "history": history,
            "final_weights": state.weights.tolist()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--policy", choices=POLICIES, default=Config.policy)
    ap.add_argument("--epochs", type=int, default=Config.epochs)
    ap.add_argument("--batch-points", type=int, default=Config.batch_points)
    ap.add_argument("--out", type=Path, default=Config().out)
    args = ap.parse_args()
    cfg = Config(policy=args.policy, epochs=args.epochs, batch_points=args.batch_points, out=args.out)
    result = run(cfg)
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    conf = asdict(cfg)
    conf["out"] = str(cfg.out)
    cfg.out.write_text(json.dumps({"config": conf, **result}, indent=1))


if __name__ == "__main__":
    main()
