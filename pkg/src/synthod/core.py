"""Dataset container, seeding, feature padding and dataset file IO."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

INLIER = 0
OUTLIER = 1


class SynthError(Exception):
    """Base class for library errors."""


class DataError(SynthError, ValueError):
    """Malformed or invalid input data."""


class ConfigError(SynthError, ValueError):
    """Invalid configuration values."""


class GenerationStalled(SynthError, RuntimeError):
    """Rejection sampling fell below its acceptance-rate floor."""


def _key_to_int(key: int | str) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"seed path elements must be non-negative, got {key}")
        return int(key) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2b(str(key).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class SeedPath:
    """A master seed plus a branch path naming one independent random stream.

    String path elements are hashed to 64 bits so callers can name purposes
    ("inliers", "outliers") instead of inventing integer codes.
    """

    master: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "master", _key_to_int(self.master))
        object.__setattr__(self, "path", tuple(_key_to_int(k) for k in self.path))

    def child(self, *keys: int | str) -> SeedPath:
        return SeedPath(self.master, self.path + tuple(_key_to_int(k) for k in keys))

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))

    def to_list(self) -> list[int]:
        return [self.master, *self.path]

    @classmethod
    def coerce(cls, seed: SeedPath | int) -> SeedPath:
        return seed if isinstance(seed, SeedPath) else cls(int(seed))


@dataclass(frozen=True)
class PaddingPolicy:
    target_dim: int = 100
    mode: str = "rescale_pad"

    def __post_init__(self):
        if self.target_dim < 1:
            raise ConfigError(f"target_dim must be >= 1, got {self.target_dim}")
        if self.mode not in ("rescale_pad", "subsample"):
            raise ConfigError(f"unknown padding mode {self.mode!r}")


def pad_and_rescale(x, D: int = 100, seed: SeedPath | int = 0) -> np.ndarray:
    """Map a length-d vector (or an n x d matrix, row-wise) to width D.

    Narrow inputs are scaled by D/d and zero padded; wide inputs keep D
    columns drawn without replacement from ``seed``. The same column subset
    is used for every row of a matrix.
    """
    x = np.asarray(x, dtype=float)
    if D < 1:
        raise DataError(f"target dimension must be >= 1, got {D}")
    if x.ndim not in (1, 2) or x.shape[-1] < 1:
        raise DataError(f"expected a vector or matrix with d >= 1, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("rejected input: non-finite feature values")
    d = x.shape[-1]
    if d == D:
        return x.copy()
    if d < D:
        pad = np.zeros(x.shape[:-1] + (D - d,))
        return np.concatenate([x * (D / d), pad], axis=-1)
    cols = np.sort(SeedPath.coerce(seed).rng().choice(d, size=D, replace=False))
    return x[..., cols]


@dataclass
class LabeledDataset:
    """Feature matrix with 0/1 outlier labels and provenance metadata."""

    features: np.ndarray
    labels: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=np.int8).ravel()
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise DataError(f"dataset needs n >= 1 and d >= 1, got {n}x{d}")
        if len(self.labels) != n:
            raise DataError(f"{len(self.labels)} labels for {n} rows")
        if not np.isin(self.labels, (INLIER, OUTLIER)).all():
            raise DataError("labels must be 0 (inlier) or 1 (outlier)")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        self.meta = dict(self.meta)
        self.meta["dim"] = d
        self.meta["contamination"] = float(self.labels.mean())
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def inliers(self) -> np.ndarray:
        return self.features[self.labels == INLIER]

    @property
    def outliers(self) -> np.ndarray:
        return self.features[self.labels == OUTLIER]

    @classmethod
    def from_parts(cls, inliers, outliers, meta=None) -> LabeledDataset:
        inliers = np.asarray(inliers, dtype=float)
        outliers = np.asarray(outliers, dtype=float)
        d = inliers.shape[1] if inliers.size else outliers.shape[1]
        X = np.vstack([inliers.reshape(-1, d), outliers.reshape(-1, d)])
        y = np.r_[np.zeros(len(inliers.reshape(-1, d))), np.ones(len(outliers.reshape(-1, d)))]
        return cls(X, y, meta or {})

    def split_indices(self, seed: SeedPath | int, context_fraction: float = 0.5):
        """Row indices ``(context, query)`` of the inductive split, each sorted."""
        rng = SeedPath.coerce(seed).rng()
        idx_in = np.flatnonzero(self.labels == INLIER)
        idx_out = np.flatnonzero(self.labels == OUTLIER)
        perm = rng.permutation(idx_in)
        n_ctx = max(1, int(round(context_fraction * len(idx_in))))
        if n_ctx >= len(idx_in) and len(idx_out) == 0:
            raise DataError("no query points left after taking the context")
        return np.sort(perm[:n_ctx]), np.sort(np.concatenate([perm[n_ctx:], idx_out]))

    def split_context(self, seed: SeedPath | int, context_fraction: float = 0.5):
        """Inductive split: a random share of inliers becomes the clean context.

        Returns ``(context, query, query_labels)``.
        """
        ctx, qry = self.split_indices(seed, context_fraction)
        return self.features[ctx], self.features[qry], self.labels[qry].astype(int)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def meta_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_dataset(ds: LabeledDataset, path) -> None:
    """Write ``<path>`` (CSV, 17 significant digits) and ``<stem>.meta.json``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = [f"f{j}" for j in range(ds.d)] + ["is_outlier"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row, lab in zip(ds.features, ds.labels):
            w.writerow([format(v, ".17g") for v in row] + [str(int(lab))])
    with open(meta_path(path), "w") as fh:
        json.dump(_jsonable(ds.meta), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_dataset(path) -> LabeledDataset:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2 or header[-1] != "is_outlier":
        raise DataError(f"{path}: malformed header, last column must be 'is_outlier'")
    expect = [f"f{j}" for j in range(len(header) - 1)]
    if header[:-1] != expect:
        raise DataError(f"{path}: malformed header, expected f0..f{len(header) - 2}")
    d = len(header) - 1
    X, y = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != d + 1:
            raise DataError(f"{path}:{lineno}: inconsistent row width {len(row)}, expected {d + 1}")
        tok = row[-1].strip()
        if tok not in ("0", "1"):
            raise DataError(f"{path}:{lineno}: unknown label token {tok!r}")
        try:
            X.append([float(v) for v in row[:-1]])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        y.append(int(tok))
    meta = {}
    mp = meta_path(path)
    if mp.exists():
        with open(mp) as fh:
            meta = json.load(fh)
    return LabeledDataset(np.array(X, dtype=float).reshape(len(X), d), np.array(y), meta)


def read_labeled_csv(path, label_column: str | int = -1) -> LabeledDataset:
    """Read an external benchmark CSV: numeric features plus a binary label column.

    Non-numeric feature columns are dropped.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataError(f"{path}: needs a header and at least one row")
    header, body = rows[0], rows[1:]
    li = header.index(label_column) if isinstance(label_column, str) else label_column % len(header)
    labels = []
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}:{lineno}: inconsistent row width")
        tok = r[li].strip()
        try:
            lab = int(float(tok))
        except ValueError:
            raise DataError(f"{path}:{lineno}: unknown label token {tok!r}") from None
        if lab not in (0, 1):
            raise DataError(f"{path}:{lineno}: unknown label token {tok!r}")
        labels.append(lab)
    cols = []
    for j in range(len(header)):
        if j == li:
            continue
        try:
            cols.append([float(r[j]) for r in body])
        except ValueError:
            continue
    if not cols:
        raise DataError(f"{path}: no numeric feature columns")
    X = np.array(cols).T
    keep = np.all(np.isfinite(X), axis=1)
    return LabeledDataset(X[keep], np.array(labels)[keep], {"source": str(path)})


def ceil_frac(frac: float, d: int) -> int:
    """``ceil(frac * d)`` guarded against float noise, clipped to [1, d]."""
    return int(min(d, max(1, math.ceil(frac * d - 1e-9))))


def uniform_int(rng: np.random.Generator, lo: int, hi: int) -> int:
    """Integer drawn uniformly from the closed range [lo, hi]."""
    return int(rng.integers(lo, hi + 1))
