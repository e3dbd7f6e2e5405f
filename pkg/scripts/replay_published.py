"""Recompute the ranking summary from published per-dataset AUROCs and print
it next to the published summary row of each model.

Usage:
    python scripts/replay_published.py
    python scripts/replay_published.py --rauc-mode minmax --delta-mode global
"""

import argparse
import csv
from dataclasses import dataclass, field
from pathlib import Path

from synthod.evalkit import EloConfig, ReportConfig, evaluate, read_score_table

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"
COLUMNS = (("avg_rank", "avg_rank", 2), ("elo", "elo", 0), ("winrate", "winrate", 2),
           ("rauc", "rauc", 3), ("champion_delta", "cdelta", 2))


@dataclass
class Config:
    scores: Path = field(default_factory=lambda: DATA / "published_auroc.csv")
    summary: Path = field(default_factory=lambda: DATA / "published_summary.csv")
    baseline: str = "OutFormer"
    rauc_mode: str = "ratio"
    delta_mode: str = "per_dataset"
    delta_scale: float = 1.0
    elo_shuffles: int = 50


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rauc-mode", default=Config.rauc_mode)
    ap.add_argument("--delta-mode", default=Config.delta_mode)
    ap.add_argument("--delta-scale", type=float, default=Config.delta_scale)
    ap.add_argument("--elo-shuffles", type=int, default=Config.elo_shuffles)
    args = ap.parse_args()
    cfg = Config(rauc_mode=args.rauc_mode, delta_mode=args.delta_mode,
                 delta_scale=args.delta_scale, elo_shuffles=args.elo_shuffles)

    table = read_score_table(cfg.scores, "auroc")
    with open(cfg.summary, newline="") as fh:
        published = {r["model"]: r for r in csv.DictReader(fh)}
    rc = ReportConfig(elo=EloConfig(shuffles=cfg.elo_shuffles), rauc_mode=cfg.rauc_mode,
                      delta_mode=cfg.delta_mode, delta_scale=cfg.delta_scale)
    report = evaluate(table, cfg.baseline, rc)

    print(f"{'model':10s} " + " ".join(f"{c[1]:>17s}" for c in COLUMNS))
    for m in table.models:
        row = report["models"][m]
        cells = [f"{row[key]:8.{nd}f}/{float(published[m][col]):<8.{nd}f}" for key, col, nd in COLUMNS]
        print(f"{m:10s} " + " ".join(cells))
    print("(computed/published)")


if __name__ == "__main__":
    main()
