"""Detection metrics, cross-dataset model rankings and paired significance tests.

Rankings work on a :class:`ScoreTable` of per-(dataset, model) performance
values where higher is better; errors are ``E = 1 - value``.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special, stats

from .core import DataError, SeedPath

# ---------------------------------------------------------------- base metrics


def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(int)
    if scores.shape != labels.shape:
        raise DataError(f"{len(scores)} scores for {len(labels)} labels")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == len(labels):
        raise DataError("single-class labels: both inliers and outliers are required")
    return scores, labels, n_pos


def auroc(scores, labels) -> float:
    """Probability that an outlier outscores an inlier, ties counting half."""
    scores, labels, n_pos = _check_binary(scores, labels)
    n_neg = len(labels) - n_pos
    # doubled mean ranks are integers, so the numerator is exact
    r2 = (2 * stats.rankdata(scores, method="average")).astype(np.int64)
    u2 = int(r2[labels == 1].sum()) - n_pos * (n_pos + 1)
    return u2 / (2 * n_pos * n_neg)


def auprc(scores, labels) -> float:
    """Average precision: precision at each distinct threshold weighted by the recall step."""
    scores, labels, n_pos = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp, k = tp[last], last + 1
    precision = tp / k
    recall_step = np.diff(np.r_[0, tp]) / n_pos
    return float(np.sum(precision * recall_step))


METRICS = {"auroc": auroc, "auprc": auprc}

# ---------------------------------------------------------------- score table


@dataclass
class ScoreTable:
    """Complete ``datasets x models`` matrix of a higher-is-better metric."""

    datasets: list[str]
    models: list[str]
    values: np.ndarray
    metric: str = "auroc"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        shape = (len(self.datasets), len(self.models))
        if self.values.shape != shape:
            raise DataError(f"values shape {self.values.shape} != {shape}")
        missing = np.isnan(self.values)
        if missing.any():
            cells = [f"({self.datasets[i]}, {self.models[j]})" for i, j in zip(*np.nonzero(missing))]
            raise DataError("incomplete score table, missing cells: " + ", ".join(cells))
        if np.any((self.values < 0) | (self.values > 1)):
            raise DataError("score table values must lie in [0, 1]")

    @property
    def errors(self) -> np.ndarray:
        return 1.0 - self.values

    def column(self, model: str) -> np.ndarray:
        return self.values[:, self.models.index(model)]

    @classmethod
    def from_records(cls, records, metric: str | None = None) -> ScoreTable:
        """Build from ``(dataset, model, metric, value)`` tuples; order of first appearance."""
        datasets, models, cells, metrics = [], [], {}, set()
        for ds, model, met, val in records:
            if metric is not None and met != metric:
                continue
            metrics.add(met)
            if ds not in datasets:
                datasets.append(ds)
            if model not in models:
                models.append(model)
            cells[ds, model] = float(val)
        if len(metrics) > 1:
            raise DataError(f"mixed metrics {sorted(metrics)}; select one")
        if not cells:
            raise DataError("no score records")
        vals = np.full((len(datasets), len(models)), np.nan)
        for (ds, model), v in cells.items():
            vals[datasets.index(ds), models.index(model)] = v
        return cls(datasets, models, vals, metrics.pop())

    def to_records(self):
        for i, ds in enumerate(self.datasets):
            for j, m in enumerate(self.models):
                yield ds, m, self.metric, float(self.values[i, j])


def read_score_table(path, metric: str | None = None) -> ScoreTable:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"dataset", "model", "metric", "value"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise DataError(f"{path}: malformed header, need columns {sorted(need)}")
        rows = []
        for lineno, r in enumerate(reader, start=2):
            try:
                rows.append((r["dataset"], r["model"], r["metric"], float(r["value"])))
            except (TypeError, ValueError):
                raise DataError(f"{path}:{lineno}: bad value {r.get('value')!r}") from None
    return ScoreTable.from_records(rows, metric)


def write_score_table(table: ScoreTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "model", "metric", "value"])
        for ds, m, met, v in table.to_records():
            w.writerow([ds, m, met, format(v, ".17g")])


# ---------------------------------------------------------------- rankings


def avg_rank(table: ScoreTable, ties: str = "average") -> dict[str, float]:
    """Mean per-dataset rank by error (1 = best).

    ``ties="average"`` gives tied models their mean rank, ``"min"`` the best.
    """
    ranks = stats.rankdata(table.errors, method=ties, axis=1)
    return dict(zip(table.models, ranks.mean(axis=0).tolist()))


def _outcome(e_a: float, e_b: float, eps: float) -> float:
    if abs(e_a - e_b) <= eps:
        return 0.5
    return 1.0 if e_a < e_b else 0.0


def expected_score(r_a: float, r_b: float) -> float:
    return 1.0 / (1.0 + 10.0 ** ((r_b - r_a) / 400.0))


@dataclass(frozen=True)
class EloConfig:
    r0: float = 1000.0
    k: float = 32.0
    # tie threshold in metric units (0.5 percentage points)
    eps: float = 0.005
    shuffles: int = 0  # 0 = declared order; otherwise average over shuffled orders
    seed: int = 0

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("K must be positive")


def _elo_pass(E: np.ndarray, cfg: EloConfig, rng: np.random.Generator | None) -> np.ndarray:
    n_d, n_m = E.shape
    R = np.full(n_m, cfg.r0)
    pairs = list(itertools.combinations(range(n_m), 2))
    ds_order = range(n_d) if rng is None else rng.permutation(n_d)
    for i in ds_order:
        order = pairs if rng is None else [pairs[p] for p in rng.permutation(len(pairs))]
        for a, b in order:
            s = _outcome(E[i, a], E[i, b], cfg.eps)
            delta = cfg.k * (s - expected_score(R[a], R[b]))
            R[a] += delta
            R[b] -= delta
    return R


def elo(table: ScoreTable, cfg: EloConfig = EloConfig()) -> dict[str, float]:
    """Round-robin ELO over datasets; with ``cfg.shuffles`` the ratings are
    averaged over that many random dataset and pairing orders."""
    E = table.errors
    if cfg.shuffles <= 0:
        R = _elo_pass(E, cfg, None)
    else:
        runs = [_elo_pass(E, cfg, SeedPath(cfg.seed, (s,)).rng()) for s in range(cfg.shuffles)]
        R = np.mean(runs, axis=0)
    return dict(zip(table.models, R.tolist()))


def winrate(table: ScoreTable) -> dict[str, float]:
    """Share of (dataset, opponent) comparisons won, exact ties counting half.

    A single-model table has no opponents and yields NaN.
    """
    E = table.errors
    n_d, n_m = E.shape
    if n_m < 2:
        return {table.models[0]: float("nan")}
    out = {}
    for j, m in enumerate(table.models):
        others = np.delete(E, j, axis=1)
        mine = E[:, [j]]
        score = (mine < others).sum() + 0.5 * (mine == others).sum()
        out[m] = float(score / (n_d * (n_m - 1)))
    return out


def rauc(table: ScoreTable, mode: str = "minmax") -> dict[str, float]:
    """Per-dataset rescaled performance averaged over datasets.

    ``minmax``: ``1 - (E - min E) / (max E - min E)``; datasets where all
    models tie contribute 1. ``ratio``: ``value / max value``.
    """
    V, E = table.values, table.errors
    if mode == "minmax":
        lo, hi = E.min(axis=1, keepdims=True), E.max(axis=1, keepdims=True)
        span = hi - lo
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(span > 0, 1.0 - (E - lo) / np.where(span > 0, span, 1.0), 1.0)
    elif mode == "ratio":
        top = V.max(axis=1, keepdims=True)
        r = np.where(top > 0, V / np.where(top > 0, top, 1.0), 1.0)
    else:
        raise ValueError(f"unknown rAUC mode {mode!r}")
    return dict(zip(table.models, r.mean(axis=0).tolist()))


@dataclass
class ChampionDelta:
    values: dict[str, float]
    champion: str
    flagged: list[str] = field(default_factory=list)


def _gap(e_best: float, e: float) -> tuple[float, bool]:
    if e == 0:
        return 0.0, e_best != 0
    return 1.0 - e_best / e, False


def champion_delta(table: ScoreTable, mode: str = "global", scale: float = 100.0) -> ChampionDelta:
    """Relative error gap to the best model, times ``scale``.

    ``global`` compares mean errors across datasets against the model with
    the lowest mean error; ``per_dataset`` averages the per-dataset gap to
    that dataset's best model.
    """
    E = table.errors
    mean_e = E.mean(axis=0)
    champ = table.models[int(np.argmin(mean_e))]
    vals, flagged = {}, []
    for j, m in enumerate(table.models):
        if mode == "global":
            g, bad = _gap(mean_e.min(), mean_e[j])
        elif mode == "per_dataset":
            gaps = [_gap(E[i].min(), E[i, j]) for i in range(len(E))]
            g, bad = float(np.mean([x for x, _ in gaps])), any(b for _, b in gaps)
        else:
            raise ValueError(f"unknown champion-delta mode {mode!r}")
        vals[m] = g * scale
        if bad:
            flagged.append(m)
    return ChampionDelta(vals, champ, flagged)


def win_lose_tie(table: ScoreTable, model: str, opponent: str, eps: float = 0.005):
    """Fractions of datasets where ``model`` beats, loses to, or ties ``opponent``
    (ties within ``eps`` in metric units)."""
    d = table.column(model) - table.column(opponent)
    n = len(d)
    win = int((d > eps).sum())
    lose = int((d < -eps).sum())
    return win / n, lose / n, (n - win - lose) / n


# ---------------------------------------------------------------- paired tests


@dataclass(frozen=True)
class TestResult:
    p: float
    statistic: float
    n: int
    method: str
    flag: str = ""


def _nonzero(diffs) -> np.ndarray:
    d = np.asarray(diffs, dtype=float).ravel()
    return d[d != 0]


def permutation_test(diffs, n_resamples: int = 100_000, seed: SeedPath | int = 0,
                     exact_max_n: int = 20) -> TestResult:
    """One-sided sign-flip test of ``sum(d) > 0``; zero differences are discarded.

    Exact over all 2^n sign patterns when ``n <= exact_max_n``; otherwise
    Monte Carlo with the observed statistic counted once in numerator and
    denominator.
    """
    d = _nonzero(diffs)
    n = len(d)
    if n == 0:
        return TestResult(1.0, 0.0, 0, "none", flag="all differences are ties")
    T = float(d.sum())
    tol = 1e-12 * max(1.0, float(np.abs(d).sum()))
    if n <= exact_max_n:
        hits = 0
        total = 1 << n
        chunk = 1 << 16
        bits = np.arange(n)
        for start in range(0, total, chunk):
            codes = np.arange(start, min(start + chunk, total))
            signs = 1 - 2 * ((codes[:, None] >> bits) & 1)
            hits += int((signs @ d >= T - tol).sum())
        return TestResult(hits / total, T, n, "exact")
    rng = SeedPath.coerce(seed).rng()
    hits = 0
    done = 0
    while done < n_resamples:
        b = min(20_000, n_resamples - done)
        signs = rng.choice(np.array([-1.0, 1.0]), size=(b, n))
        hits += int((signs @ d >= T - tol).sum())
        done += b
    return TestResult((hits + 1) / (n_resamples + 1), T, n, "monte_carlo")


def _signed_rank_null(ranks2: np.ndarray) -> np.ndarray:
    """Counts of each doubled rank-sum value over all sign patterns."""
    total = int(ranks2.sum())
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in ranks2.astype(int):
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:len(counts) - r]
        counts = counts + shifted
    return counts


def wilcoxon_test(diffs, exact_max_n: int = 25, method: str = "auto") -> TestResult:
    """One-sided signed-rank test that differences tend to be positive.

    Ranks of ``|d|`` use mean ranks for ties. The exact null is enumerated
    for ``n <= exact_max_n``; larger samples use the normal approximation
    with tie and continuity corrections.
    """
    d = _nonzero(diffs)
    n = len(d)
    if n == 0:
        return TestResult(1.0, 0.0, 0, "none", flag="all differences are ties")
    ranks = stats.rankdata(np.abs(d), method="average")
    W = float(ranks[d > 0].sum())
    use_exact = method == "exact" or (method == "auto" and n <= exact_max_n)
    if use_exact:
        ranks2 = np.round(2 * ranks).astype(int)
        counts = _signed_rank_null(ranks2)
        w2 = int(round(2 * W))
        p = float(sum(counts[w2:]) / (1 << n))
        return TestResult(p, W, n, "exact")
    mean = n * (n + 1) / 4.0
    _, t = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(((t**3 - t) / 48.0).sum())
    z = (W - mean - 0.5) / math.sqrt(var)
    return TestResult(float(special.ndtr(-z)), W, n, "normal")


# ---------------------------------------------------------------- report

REPORT_COLUMNS = ("avg_rank", "elo", "winrate", "rauc", "champion_delta",
                  "win", "lose", "tie", "p_permutation", "p_wilcoxon")


@dataclass(frozen=True)
class ReportConfig:
    rank_ties: str = "average"
    elo: EloConfig = EloConfig()
    rauc_mode: str = "minmax"
    delta_mode: str = "global"
    delta_scale: float = 100.0
    tie_eps: float = 0.005
    n_resamples: int = 100_000
    seed: int = 0


def evaluate(table: ScoreTable, baseline: str | None = None,
             cfg: ReportConfig = ReportConfig()) -> dict:
    """All ranking metrics per model, plus paired comparisons against ``baseline``.

    Win/Lose/Tie and p-values are from the baseline's side: a small p means
    the baseline scores higher than that model.
    """
    if baseline is not None and baseline not in table.models:
        raise DataError(f"baseline {baseline!r} not among models {table.models}")
    ranks = avg_rank(table, cfg.rank_ties)
    elos = elo(table, cfg.elo)
    wins = winrate(table)
    raucs = rauc(table, cfg.rauc_mode)
    cd = champion_delta(table, cfg.delta_mode, cfg.delta_scale)
    rows = {}
    for m in table.models:
        row = {
            "avg_rank": ranks[m],
            "elo": elos[m],
            "winrate": wins[m],
            "rauc": raucs[m],
            "champion_delta": cd.values[m],
        }
        if baseline is not None and m != baseline:
            w, l, t = win_lose_tie(table, baseline, m, cfg.tie_eps)
            diffs = table.column(baseline) - table.column(m)
            row.update(win=w, lose=l, tie=t,
                       p_permutation=permutation_test(diffs, cfg.n_resamples, cfg.seed).p,
                       p_wilcoxon=wilcoxon_test(diffs).p)
        rows[m] = row
    flags = []
    if len(table.models) < 2:
        flags.append("winrate undefined for a single model")
    flags += [f"champion delta undefined for {m}" for m in cd.flagged]
    return {
        "metric": table.metric,
        "n_datasets": len(table.datasets),
        "baseline": baseline,
        "champion": cd.champion,
        "models": rows,
        "flags": flags,
    }


def format_report(report: dict) -> str:
    head = ["Model", "AvgRank", "ELO", "Winrate", "rAUC", "CDelta", "Win", "Lose", "Tie",
            "p-perm", "p-wil"]
    lines = ["  ".join(f"{h:>10}" for h in head)]

    def fmt(v, spec):
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return f"{'-':>10}"
        return f"{v:>10{spec}}"

    for m, r in report["models"].items():
        cells = [f"{m[:10]:>10}", fmt(r["avg_rank"], ".2f"), fmt(r["elo"], ".0f"),
                 fmt(r["winrate"], ".2f"), fmt(r["rauc"], ".3f"), fmt(r["champion_delta"], ".2f")]
        for key, spec in (("win", ".2f"), ("lose", ".2f"), ("tie", ".2f"),
                          ("p_permutation", ".3f"), ("p_wilcoxon", ".3f")):
            cells.append(fmt(r.get(key), spec))
        lines.append("  ".join(cells))
    for f in report["flags"]:
        lines.append(f"note: {f}")
    return "\n".join(lines) + "\n"


def _nan_to_none(obj):
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(v) for v in obj]
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def write_report(report: dict, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(_nan_to_none(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    (out_dir / "report.txt").write_text(format_report(report))
