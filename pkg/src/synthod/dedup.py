"""Column-fingerprint duplicate detection across dataset files."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

TOL = 1e-9


def feature_hash(column) -> np.ndarray:
    """Means of five bounded transforms of one column; a 5-vector fingerprint."""
    x = np.asarray(column, dtype=float)
    return np.array([
        np.mean(np.sin(x)),
        np.mean(np.cos(np.e * x)),
        np.mean(x / (1 + np.abs(x))),
        np.mean(np.arctan(x)),
        np.mean(np.log(np.abs(x) + 1)),
    ])


def dataset_hash(X) -> np.ndarray:
    """One fingerprint row per column of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.array([feature_hash(X[:, j]) for j in range(X.shape[1])]).reshape(-1, 5)


def covers(a: np.ndarray, b: np.ndarray, tol: float = TOL) -> bool:
    """Every column fingerprint in ``a`` has a match in ``b`` within ``tol``."""
    if len(a) == 0 or len(b) == 0:
        return False
    close = np.all(np.abs(a[:, None, :] - b[None, :, :]) <= tol, axis=2)
    return bool(close.any(axis=1).all())


def conflict(a: np.ndarray, b: np.ndarray, tol: float = TOL) -> bool:
    return covers(a, b, tol) or covers(b, a, tol)


def group_duplicates(hashes: dict[str, np.ndarray], tol: float = TOL) -> list[list[str]]:
    """Connected components of the conflict relation, each sorted, listed by first member."""
    names = sorted(hashes)
    parent = {n: n for n in names}

    def find(n):
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if conflict(hashes[a], hashes[b], tol):
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups: dict[str, list[str]] = {}
    for n in names:
        groups.setdefault(find(n), []).append(n)
    return sorted(groups.values())


def numeric_columns(path, skip=("is_outlier",)) -> np.ndarray:
    """Numeric feature columns of a CSV file; others are skipped with a warning."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return np.zeros((0, 0))
    header, body = rows[0], rows[1:]
    cols = []
    for j, name in enumerate(header):
        if name in skip:
            continue
        try:
            cols.append([float(r[j]) for r in body])
        except (ValueError, IndexError):
            log.warning("%s: skipping non-numeric column %r", path, name)
    return np.array(cols).T if cols else np.zeros((len(body), 0))


def dedup_dir(directory, tol: float = TOL) -> dict:
    """Group the CSV datasets in ``directory`` by fingerprint conflicts."""
    paths = sorted(p for p in Path(directory).glob("*.csv"))
    hashes = {p.name: dataset_hash(numeric_columns(p)) for p in paths}
    groups = group_duplicates(hashes, tol)
    return {
        "groups": groups,
        "duplicates": [g for g in groups if len(g) > 1],
        "keep": [g[0] for g in groups],
    }
