"""Command-line entry point: generate, curriculum, detect, evaluate, dedup."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import evalkit
from .benchmark import standardize
from .config import RunConfig, load_config
from .core import ConfigError, DataError, SeedPath, SynthError, read_dataset, write_dataset
from .curriculum import CategoryState, report_line, run_sec_epoch
from .dedup import dedup_dir
from .detectors.ensemble import ensemble_score
from .detectors.iforest import iforest_fit, iforest_score
from .detectors.knn import knn_score_avg
from .detectors.learner import ReferenceLearner
from .priors import ARCHETYPES, draw_dataset

log = logging.getLogger("synthod")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3

PRIOR_ARCHETYPES = {
    "gmm": ("subspace",),
    "scm": ("measurement", "structural"),
    "copula": ("probabilistic", "dependence"),
}
DETECTORS = ("knn", "iforest", "knn-ensemble", "iforest-ensemble")


def registry_name(prior: str, archetype: str | None) -> str:
    if prior not in PRIOR_ARCHETYPES:
        raise ConfigError(f"unknown prior {prior!r}; choose from {sorted(PRIOR_ARCHETYPES)} or mixed")
    if prior == "gmm":
        if archetype not in (None, "subspace"):
            raise ConfigError(f"gmm supports only the subspace archetype, got {archetype!r}")
        return "gmm"
    if archetype is None:
        raise ConfigError(f"--archetype is required for prior {prior!r}")
    if archetype not in PRIOR_ARCHETYPES[prior]:
        raise ConfigError(f"{prior} archetypes are {PRIOR_ARCHETYPES[prior]}, got {archetype!r}")
    return f"{prior}-{archetype}"


def _json_dump(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- generate


def _generate_one(args):
    name, seed, n_in, cfgs = args
    return draw_dataset(name, seed, n_in=n_in, cfgs=cfgs)


def cmd_generate(cfg: RunConfig, prior: str, archetype: str | None, count: int, out: Path,
                 jobs: int = 1) -> list[dict]:
    master = SeedPath(cfg.run.seed)
    names = []
    for i in range(count):
        if prior == "mixed":
            rng = master.child("mixed", i).rng()
            names.append(ARCHETYPES[int(rng.integers(len(ARCHETYPES)))])
        else:
            names.append(registry_name(prior, archetype))
    work = [(n, master.child(i), cfg.run.n_in, cfg.priors) for i, n in enumerate(names)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            datasets = list(ex.map(_generate_one, work))
    else:
        datasets = [_generate_one(w) for w in work]
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i, (name, ds) in enumerate(zip(names, datasets)):
        fname = f"dataset_{i:05d}.csv"
        write_dataset(ds, out / fname)
        manifest.append({"file": fname, "archetype": name, "seed": master.child(i).to_list(),
                         "n": ds.n, "d": ds.d, "contamination": ds.meta["contamination"]})
    _json_dump({"master_seed": cfg.run.seed, "count": count, "datasets": manifest},
               out / "manifest.json")
    return manifest


# ---------------------------------------------------------------- curriculum


def _latest_checkpoint(ckpt_dir: Path) -> int | None:
    steps = [int(p.stem.split("_")[1]) for p in ckpt_dir.glob("state_*.json")]
    steps = [t for t in steps if (ckpt_dir / f"learner_{t:06d}.npz").exists()]
    return max(steps) if steps else None


def cmd_curriculum(cfg: RunConfig, epochs: int, out: Path, jobs: int = 1, resume: bool = False,
                   stop_after: int | None = None) -> dict:
    """Run curriculum epochs, checkpointing state and learner every ``checkpoint_every`` epochs.

    ``stop_after`` ends the process early (as if interrupted) for resume testing.
    """
    sec = replace(cfg.sec_config, epochs=epochs)
    cur = cfg.curriculum
    master = SeedPath(cfg.run.seed)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    reports_path = out / "reports.jsonl"
    state = CategoryState(priors=cur.priors, bins=cur.bins, tau=cur.tau, gamma=cur.gamma)
    learner = ReferenceLearner(cfg.learner, master.child("learner"))
    lines: list[str] = []
    last = _latest_checkpoint(ckpt_dir) if resume else None
    if last is not None:
        with open(ckpt_dir / f"state_{last:06d}.json") as fh:
            state = CategoryState.from_dict(json.load(fh))
        with np.load(ckpt_dir / f"learner_{last:06d}.npz") as z:
            learner.load_state_dict(dict(z))
        if reports_path.exists():
            lines = reports_path.read_text().splitlines()[:last]
    elif not resume:
        for p in ckpt_dir.glob("*"):
            p.unlink()
    with open(reports_path, "w") as fh:
        fh.writelines(l + "\n" for l in lines)
    while state.t < epochs:
        state, learner, rep = run_sec_epoch(state, learner, sec, master.child("sec"), cfg.priors,
                                            jobs=jobs)
        with open(reports_path, "a") as fh:
            fh.write(report_line(rep) + "\n")
        if state.t % cfg.run.checkpoint_every == 0 or state.t == epochs:
            _json_dump(state.to_dict(), ckpt_dir / f"state_{state.t:06d}.json")
            np.savez(ckpt_dir / f"learner_{state.t:06d}.npz", **learner.state_dict())
        if stop_after is not None and state.t >= stop_after:
            break
    final = {"epochs_done": state.t, "state": state.to_dict(), "policy": sec.policy}
    _json_dump(final, out / "final_state.json")
    return final


# ---------------------------------------------------------------- detect


def _scorer(model: str, cfg: RunConfig, seed: SeedPath):
    if model == "knn":
        return lambda c, q: knn_score_avg(c, q)
    if model == "iforest":
        return lambda c, q: iforest_score(iforest_fit(c, cfg.iforest, seed), q)
    base = _scorer(model.split("-")[0], cfg, seed)
    return lambda c, q: ensemble_score(base, c, q, cfg.ensemble, seed.child("ensemble"))


def _detect_one(args):
    path, models, cfg, seed = args
    ds = read_dataset(path)
    ctx_idx, qry_idx = ds.split_indices(seed.child("split"), cfg.run.context_fraction)
    ctx, qry = standardize(ds.features[ctx_idx], ds.features[qry_idx])
    y = ds.labels[qry_idx].astype(int)
    out = []
    for m in models:
        scores = _scorer(m, cfg, seed.child(m))(ctx, qry)
        out.append((m, qry_idx, scores, y))
    return out


def _dataset_files(inputs) -> list[Path]:
    files = []
    for p in map(Path, inputs):
        if p.is_dir():
            files += sorted(f for f in p.glob("*.csv"))
        elif p.is_file():
            files.append(p)
        else:
            raise DataError(f"no such dataset file or directory: {p}")
    if not files:
        raise DataError("no dataset files given")
    return files


def cmd_detect(cfg: RunConfig, inputs, models, out: Path, jobs: int = 1) -> evalkit.ScoreTable:
    """Score each dataset's query split; write per-point scores and per-dataset metrics."""
    files = _dataset_files(inputs)
    master = SeedPath(cfg.run.seed)
    work = [(f, tuple(models), cfg, master.child("detect", f.stem)) for f in files]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_detect_one, work))
    else:
        results = [_detect_one(w) for w in work]
    out.mkdir(parents=True, exist_ok=True)
    records = []
    with open(out / "scores.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset_id", "model", "point_index", "score"])
        for f, res in zip(files, results):
            for m, idx, scores, y in res:
                for i, s in zip(idx, scores):
                    w.writerow([f.stem, m, int(i), format(float(s), ".17g")])
                for metric, fn in evalkit.METRICS.items():
                    records.append((f.stem, m, metric, fn(scores, y)))
    with open(out / "table.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "model", "metric", "value"])
        for r in records:
            w.writerow([r[0], r[1], r[2], format(r[3], ".17g")])
    return evalkit.ScoreTable.from_records([r for r in records if r[2] == "auroc"])


# ---------------------------------------------------------------- evaluate


def cmd_evaluate(source: Path, metric: str, baseline: str | None, out: Path,
                 report_cfg: evalkit.ReportConfig = evalkit.ReportConfig()) -> dict:
    path = source / "table.csv" if source.is_dir() else source
    if not path.is_file():
        raise DataError(f"score table not found: {path}")
    table = evalkit.read_score_table(path, metric)
    report = evalkit.evaluate(table, baseline, report_cfg)
    evalkit.write_report(report, out)
    return report


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
    common.add_argument("--out", type=Path, required=True, help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="synthod", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write synthetic datasets")
    g.add_argument("--prior", required=True, choices=[*PRIOR_ARCHETYPES, "mixed"])
    g.add_argument("--archetype", choices=sorted({a for v in PRIOR_ARCHETYPES.values() for a in v}))
    g.add_argument("--count", type=int, help="number of datasets (overrides [run] count)")

    c = sub.add_parser("curriculum", parents=[common], help="run curriculum epochs")
    c.add_argument("--epochs", type=int, required=True)
    c.add_argument("--policy", choices=["sec", "naive", "spl", "ac"])
    c.add_argument("--resume", action="store_true", help="continue from the latest checkpoint")

    d = sub.add_parser("detect", parents=[common], help="score datasets with baseline detectors")
    d.add_argument("inputs", nargs="+", help="dataset CSV files or directories")
    d.add_argument("--model", action="append", choices=DETECTORS,
                   help="detector (repeatable; default knn and iforest)")

    e = sub.add_parser("evaluate", parents=[common], help="rank models from a score table")
    e.add_argument("source", type=Path, help="score table CSV or a detect output directory")
    e.add_argument("--metric", choices=["auroc", "auprc"], default="auroc")
    e.add_argument("--baseline", help="model compared pairwise against all others")
    e.add_argument("--rank-ties", choices=["average", "min"], default="average")
    e.add_argument("--rauc-mode", choices=["minmax", "ratio"], default="minmax")
    e.add_argument("--delta-mode", choices=["global", "per_dataset"], default="global")
    e.add_argument("--delta-scale", type=float, default=100.0)
    e.add_argument("--elo-shuffles", type=int, default=0)

    u = sub.add_parser("dedup", parents=[common], help="group duplicate datasets")
    u.add_argument("directory", type=Path)
    return p


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    run = cfg.run
    if args.seed is not None:
        run = replace(run, seed=args.seed)
    if getattr(args, "count", None) is not None:
        run = replace(run, count=args.count)
    cfg = replace(cfg, run=run)
    if getattr(args, "policy", None):
        cfg = replace(cfg, sec=replace(cfg.sec, policy=args.policy))
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        if args.command == "generate":
            cmd_generate(cfg, args.prior, args.archetype, cfg.run.count, args.out, args.jobs)
        elif args.command == "curriculum":
            cmd_curriculum(cfg, args.epochs, args.out, args.jobs, args.resume)
        elif args.command == "detect":
            cmd_detect(cfg, args.inputs, args.model or ["knn", "iforest"], args.out, args.jobs)
        elif args.command == "evaluate":
            rc = evalkit.ReportConfig(
                rank_ties=args.rank_ties,
                elo=evalkit.EloConfig(shuffles=args.elo_shuffles, seed=cfg.run.seed),
                rauc_mode=args.rauc_mode, delta_mode=args.delta_mode,
                delta_scale=args.delta_scale, seed=cfg.run.seed)
            report = cmd_evaluate(args.source, args.metric, args.baseline, args.out, rc)
            sys.stdout.write(evalkit.format_report(report))
        elif args.command == "dedup":
            res = dedup_dir(args.directory)
            args.out.mkdir(parents=True, exist_ok=True)
            _json_dump(res, args.out / "dedup.json")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
