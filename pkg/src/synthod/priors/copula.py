"""Copula inliers with probabilistic (boundary) and dependence outliers.

Inliers are ``x_j = F_j^{-1}(u_j)`` with ``u`` drawn from a Gaussian copula or
a first-tree D-vine. Outliers are made by editing ``u`` before the marginal
map, so every archetype acts in copula space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ..core import ConfigError, LabeledDataset, SeedPath, ceil_frac, uniform_int
from . import bivariate
from .marginals import FAMILIES, MarginalSpec, inverse_marginal, sample_marginal

U_EPS = 1e-12


@dataclass(frozen=True)
class CopulaConfig:
    d_range: tuple[int, int] = (2, 100)
    kinds: tuple[str, ...] = ("gaussian", "vine")
    marginal_families: tuple[str, ...] = FAMILIES
    pair_families: tuple[str, ...] = bivariate.PAIR_FAMILIES
    alpha_indp_range: tuple[float, float] = (0.1, 0.3)
    tau_range: tuple[float, float] = (0.1, 0.7)
    contamination_range: tuple[float, float] = (0.02, 0.2)
    jitter: float = 1e-3

    def __post_init__(self):
        if not 2 <= self.d_range[0] <= self.d_range[1] <= 100:
            raise ConfigError(f"d_range {self.d_range} outside [2, 100]")
        if not self.kinds or set(self.kinds) - {"gaussian", "vine"}:
            raise ConfigError(f"kinds {self.kinds} must be a subset of gaussian, vine")
        if not self.marginal_families or set(self.marginal_families) - set(FAMILIES):
            raise ConfigError(f"unknown marginal families in {self.marginal_families}")
        if not self.pair_families or set(self.pair_families) - set(bivariate.PAIR_FAMILIES):
            raise ConfigError(f"unknown pair families in {self.pair_families}")
        if not 0 <= self.alpha_indp_range[0] <= self.alpha_indp_range[1] <= 1:
            raise ConfigError(f"alpha_indp_range {self.alpha_indp_range} outside [0, 1]")
        if not 0 < self.tau_range[0] <= self.tau_range[1] < 1:
            raise ConfigError(f"tau_range {self.tau_range} outside (0, 1)")
        if not 0 <= self.contamination_range[0] <= self.contamination_range[1] < 1:
            raise ConfigError(f"contamination_range {self.contamination_range} invalid")


@dataclass(frozen=True)
class CopulaOutlierConfig:
    gamma_range: tuple[float, float] = (0.02, 0.2)
    low_band: tuple[float, float] = (0.1, 0.3)
    high_band: tuple[float, float] = (0.7, 0.9)
    modes: tuple[str, ...] = ("inverse_corr", "random_permutation")

    def __post_init__(self):
        if not 0 < self.gamma_range[0] <= self.gamma_range[1] <= 1:
            raise ConfigError(f"gamma_range {self.gamma_range} outside (0, 1]")
        for band in (self.low_band, self.high_band):
            if not 0 < band[0] <= band[1] < 1:
                raise ConfigError(f"perturbation band {band} outside (0, 1)")
        if not self.modes or set(self.modes) - {"inverse_corr", "random_permutation"}:
            raise ConfigError(f"unknown dependence modes {self.modes}")


@dataclass(frozen=True)
class CopulaSpec:
    kind: str
    marginals: tuple[MarginalSpec, ...]
    corr: np.ndarray | None = None  # gaussian kind
    independent: np.ndarray | None = None  # decoupled coordinates, gaussian kind
    order: np.ndarray | None = None  # vine variable order
    edges: tuple[tuple[str, float, float], ...] = ()  # (family, tau, theta) per vine edge

    @property
    def d(self) -> int:
        return len(self.marginals)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "marginals": [m.to_dict() for m in self.marginals]}
        if self.kind == "gaussian":
            out["independent"] = self.independent.tolist()
        else:
            out["order"] = self.order.tolist()
            out["edges"] = [{"family": f, "tau": t, "theta": th} for f, t, th in self.edges]
        return out


def random_correlation(d: int, alpha_indp: float, rng: np.random.Generator,
                       jitter: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """Factor-model correlation with a decoupled coordinate subset.

    Zeroing the off-diagonal entries of a subset leaves a block-diagonal
    matrix whose dependent block is a principal submatrix of a positive
    definite matrix, so it stays positive definite.
    """
    k = math.ceil(d / 2)
    L = rng.standard_normal((d, k))
    S = L @ L.T + jitter * np.eye(d)
    sd = np.sqrt(np.diag(S))
    R = S / np.outer(sd, sd)
    n_ind = int(round(alpha_indp * d))
    ind = np.sort(rng.choice(d, size=n_ind, replace=False)) if n_ind else np.zeros(0, int)
    R[ind, :] = 0.0
    R[:, ind] = 0.0
    R[ind, ind] = 1.0
    R = 0.5 * (R + R.T)
    if np.linalg.eigvalsh(R)[0] <= 0:
        raise ConfigError("correlation matrix lost positive definiteness")
    return R, ind


def sample_copula_spec(cfg: CopulaConfig, seed: SeedPath, d: int | None = None,
                       kind: str | None = None) -> CopulaSpec:
    rng = seed.rng()
    if d is None:
        d = uniform_int(rng, *cfg.d_range)
    if kind is None:
        kind = cfg.kinds[int(rng.integers(len(cfg.kinds)))]
    fams = cfg.marginal_families
    marginals = tuple(sample_marginal(rng, fams[int(rng.integers(len(fams)))]) for _ in range(d))
    if kind == "gaussian":
        alpha = float(rng.uniform(*cfg.alpha_indp_range))
        R, ind = random_correlation(d, alpha, rng, cfg.jitter)
        return CopulaSpec("gaussian", marginals, corr=R, independent=ind)
    order = rng.permutation(d)
    edges = []
    for _ in range(d - 1):
        fam = cfg.pair_families[int(rng.integers(len(cfg.pair_families)))]
        tau = float(rng.uniform(*cfg.tau_range))
        edges.append((fam, tau, float(bivariate.param_from_tau(fam, tau))))
    return CopulaSpec("vine", marginals, order=order, edges=tuple(edges))


def _factor(R: np.ndarray) -> np.ndarray:
    """``F`` with ``F F^T = R``; symmetric square root when ``R`` is only semidefinite."""
    try:
        return np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        evals, evecs = np.linalg.eigh(R)
        return evecs * np.sqrt(np.clip(evals, 0, None))


def sample_uniforms(spec: CopulaSpec, n: int, seed: SeedPath) -> np.ndarray:
    """Draws from the copula on the open unit cube."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = seed.rng()
    if spec.kind == "gaussian":
        z = rng.standard_normal((n, spec.d)) @ _factor(spec.corr).T
        u = special.ndtr(z)
    else:
        w = rng.random((n, spec.d))
        u = np.empty_like(w)
        first = spec.order[0]
        u[:, first] = w[:, first]
        # first-tree D-vine: each variable is conditioned only on its predecessor
        for i, (fam, _, theta) in enumerate(spec.edges):
            prev, cur = spec.order[i], spec.order[i + 1]
            u[:, cur] = bivariate.h_inverse(fam, theta, w[:, cur], u[:, prev])
    return np.clip(u, U_EPS, 1 - U_EPS)


def to_features(U: np.ndarray, spec: CopulaSpec) -> np.ndarray:
    return np.column_stack([inverse_marginal(U[:, j], m) for j, m in enumerate(spec.marginals)])


def probabilistic_outliers(U: np.ndarray, gamma: float, seed: SeedPath,
                           cfg: CopulaOutlierConfig = CopulaOutlierConfig(),
                           return_mask: bool = False):
    """Per row, replace ``ceil(gamma * d)`` coordinates with low- or high-band draws."""
    rng = seed.rng()
    U = np.array(U, dtype=float)
    n, d = U.shape
    k = ceil_frac(gamma, d)
    mask = np.zeros((n, d), dtype=bool)
    for i in range(n):
        mask[i, rng.choice(d, size=k, replace=False)] = True
    m = int(mask.sum())
    high = rng.random(m) < 0.5
    vals = np.where(high, rng.uniform(*cfg.high_band, size=m), rng.uniform(*cfg.low_band, size=m))
    U[mask] = vals
    return (U, mask) if return_mask else U


def invcorr_range(d: int) -> tuple[int, int]:
    """Half-open ``[lo, hi)`` range for the number of edited coordinates."""
    lo = 1 + d // 3
    hi = min(1 + (2 * d) // 3, d + 1)
    return lo, max(hi, lo + 1)


def dependence_outliers(U: np.ndarray, mode: str, k: int, seed: SeedPath,
                        return_mask: bool = False):
    """Per row, edit a random ``k``-subset of coordinates.

    ``inverse_corr`` maps ``u -> 1 - u``; ``random_permutation`` shuffles the
    subset's values among its positions.
    """
    if mode not in ("inverse_corr", "random_permutation"):
        raise ValueError(f"unknown dependence mode {mode!r}")
    rng = seed.rng()
    U = np.array(U, dtype=float)
    n, d = U.shape
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    mask = np.zeros((n, d), dtype=bool)
    for i in range(n):
        cols = rng.choice(d, size=k, replace=False)
        mask[i, cols] = True
        if mode == "inverse_corr":
            U[i, cols] = 1.0 - U[i, cols]
        else:
            U[i, cols] = U[i, rng.permutation(cols)]
    return (U, mask) if return_mask else U


def generate_copula_dataset(cfg: CopulaConfig, archetype: str, n_in: int, n_out: int,
                            seed: SeedPath, d: int | None = None,
                            out_cfg: CopulaOutlierConfig = CopulaOutlierConfig()) -> LabeledDataset:
    if archetype not in ("probabilistic", "dependence"):
        raise ValueError(f"unknown copula archetype {archetype!r}")
    if n_in < 0 or n_out < 0 or n_in + n_out == 0:
        raise ValueError("counts must be >= 0 and not both zero")
    spec = sample_copula_spec(cfg, seed.child("spec"), d=d)
    rng = seed.child("hyper").rng()
    hyper = spec.to_dict()
    hyper["power_law_form"] = "loc + scale * (1 - u)^(-1/a)"
    X_in = to_features(sample_uniforms(spec, n_in, seed.child("inliers")), spec) if n_in else None
    X_out = None
    if archetype == "probabilistic":
        gamma = float(rng.uniform(*out_cfg.gamma_range))
        hyper["gamma"] = gamma
        if n_out:
            U = sample_uniforms(spec, n_out, seed.child("outliers"))
            X_out = to_features(probabilistic_outliers(U, gamma, seed.child("perturb"), out_cfg), spec)
    else:
        mode = out_cfg.modes[int(rng.integers(len(out_cfg.modes)))]
        k = int(rng.integers(*invcorr_range(spec.d)))
        hyper.update(mode=mode, k=k)
        if n_out:
            U = sample_uniforms(spec, n_out, seed.child("outliers"))
            X_out = to_features(dependence_outliers(U, mode, k, seed.child("perturb")), spec)
    empty = np.zeros((0, spec.d))
    meta = {"prior": "copula", "archetype": archetype, "seed": seed.to_list(), "hyper": hyper}
    return LabeledDataset.from_parts(X_in if X_in is not None else empty,
                                     X_out if X_out is not None else empty, meta)
