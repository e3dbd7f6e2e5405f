"""Gaussian-mixture inliers with contextual-subspace outliers.

Points are drawn from a diagonal mixture and then pushed through a random
affine map ``x -> W x + b``. Labels are assigned before the map, against an
empirical negative-log-likelihood quantile of the original mixture.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from ..core import (
    ConfigError,
    GenerationStalled,
    LabeledDataset,
    SeedPath,
    ceil_frac,
    uniform_int,
)

LOG_2PI = np.log(2 * np.pi)


@dataclass(frozen=True)
class GmmConfig:
    m_range: tuple[int, int] = (1, 5)
    d_range: tuple[int, int] = (2, 100)
    mean_range: tuple[float, float] = (-5.0, 5.0)
    var_max: float = 5.0
    affine_range: tuple[float, float] = (-1.0, 1.0)
    # lower bound of the subspace fraction is 1/d; only the upper bound is free
    alpha_max: float = 1.0
    s_range: tuple[float, float] = (5.0, 10.0)
    contamination_range: tuple[float, float] = (0.02, 0.2)
    quantile: float = 0.90
    n_ref: int = 100_000
    max_proposals: int = 10_000_000
    min_acceptance: float = 1e-4

    def __post_init__(self):
        lo, hi = self.m_range
        if not 1 <= lo <= hi <= 5:
            raise ConfigError(f"m_range {self.m_range} outside [1, 5]")
        lo, hi = self.d_range
        if not 1 <= lo <= hi <= 100:
            raise ConfigError(f"d_range {self.d_range} outside [1, 100]")
        if not -5 <= self.mean_range[0] <= self.mean_range[1] <= 5:
            raise ConfigError(f"mean_range {self.mean_range} outside [-5, 5]")
        if not 0 < self.var_max <= 5:
            raise ConfigError(f"var_max {self.var_max} outside (0, 5]")
        if not -1 <= self.affine_range[0] <= self.affine_range[1] <= 1:
            raise ConfigError(f"affine_range {self.affine_range} outside [-1, 1]")
        if not 0 < self.alpha_max <= 1:
            raise ConfigError(f"alpha_max {self.alpha_max} outside (0, 1]")
        if not 5 <= self.s_range[0] <= self.s_range[1] <= 10:
            raise ConfigError(f"s_range {self.s_range} outside [5, 10]")
        if not 0.02 <= self.contamination_range[0] <= self.contamination_range[1] <= 0.2:
            raise ConfigError(f"contamination_range {self.contamination_range} outside [0.02, 0.2]")
        if not 0 < self.quantile < 1:
            raise ConfigError(f"quantile {self.quantile} outside (0, 1)")
        if self.n_ref < 1000:
            raise ConfigError(f"n_ref must be >= 1000, got {self.n_ref}")


@dataclass(frozen=True)
class GmmSpec:
    weights: np.ndarray  # (m,)
    means: np.ndarray  # (m, d)
    variances: np.ndarray  # (m, d) diagonal covariances
    W: np.ndarray = field(default=None)  # (d, d)
    b: np.ndarray = field(default=None)  # (d,)

    def __post_init__(self):
        m, d = self.means.shape
        if self.W is None:
            object.__setattr__(self, "W", np.eye(d))
        if self.b is None:
            object.__setattr__(self, "b", np.zeros(d))
        if abs(self.weights.sum() - 1) > 1e-12:
            raise ConfigError("mixture weights must sum to 1")
        if not np.all(self.variances > 0):
            raise ConfigError("variances must be strictly positive")

    @property
    def m(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "W": self.W.tolist(),
            "b": self.b.tolist(),
        }


def sample_gmm_spec(cfg: GmmConfig, seed: SeedPath, d: int | None = None) -> GmmSpec:
    """Draw a mixture. ``d`` overrides the configured dimension range."""
    rng = seed.rng()
    m = uniform_int(rng, *cfg.m_range)
    if d is None:
        d = uniform_int(rng, *cfg.d_range)
    weights = rng.dirichlet(np.ones(m))
    weights = weights / weights.sum()
    means = rng.uniform(*cfg.mean_range, size=(m, d))
    # 1 - U maps [0, 1) onto (0, 1], so variances land in (0, var_max]
    variances = cfg.var_max * (1.0 - rng.random((m, d)))
    W = rng.uniform(*cfg.affine_range, size=(d, d))
    b = rng.uniform(*cfg.affine_range, size=d)
    return GmmSpec(weights, means, variances, W, b)


def sample_latent(spec: GmmSpec, n: int, seed: SeedPath) -> np.ndarray:
    """Pre-transform draws from the diagonal mixture."""
    rng = seed.rng()
    comp = rng.choice(spec.m, size=n, p=spec.weights)
    z = rng.standard_normal((n, spec.d))
    return spec.means[comp] + z * np.sqrt(spec.variances[comp])


def apply_affine(spec: GmmSpec, x: np.ndarray) -> np.ndarray:
    return x @ spec.W.T + spec.b


def sample_points(spec: GmmSpec, n: int, seed: SeedPath) -> np.ndarray:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return apply_affine(spec, sample_latent(spec, n, seed))


def mixture_nll(spec: GmmSpec, x: np.ndarray) -> np.ndarray:
    """Negative log-density of pre-transform points under the mixture."""
    x = np.atleast_2d(x)
    comp_ll = np.empty((x.shape[0], spec.m))
    for k in range(spec.m):
        var = spec.variances[k]
        diff2 = (x - spec.means[k]) ** 2 / var
        comp_ll[:, k] = -0.5 * (diff2.sum(axis=1) + np.log(var).sum() + spec.d * LOG_2PI)
    return -logsumexp(comp_ll + np.log(spec.weights), axis=1)


def nll_threshold(spec: GmmSpec, q: float = 0.90, n_ref: int = 100_000,
                  seed: SeedPath | None = None) -> float:
    """Empirical q-quantile of the mixture NLL over fresh pre-transform draws."""
    if not 0 < q < 1:
        raise ValueError(f"q must be in (0, 1), got {q}")
    if n_ref < 1000:
        raise ValueError(f"n_ref must be >= 1000, got {n_ref}")
    seed = seed if seed is not None else SeedPath(0)
    ref = sample_latent(spec, n_ref, seed)
    return float(np.quantile(mixture_nll(spec, ref), q))


def inflate_subspace(spec: GmmSpec, alpha: float, s: float,
                     seed: SeedPath) -> tuple[GmmSpec, int, np.ndarray]:
    """Multiply the variances of one random component on ceil(alpha*d) random dims by s.

    Returns the inflated spec, the chosen component and the inflated dims.
    """
    rng = seed.rng()
    k = int(rng.integers(spec.m))
    n_dims = ceil_frac(alpha, spec.d)
    dims = np.sort(rng.choice(spec.d, size=n_dims, replace=False))
    var = spec.variances.copy()
    var[k, dims] *= s
    return replace(spec, variances=var), k, dims


def _rejection(spec_draw: GmmSpec, spec_ref: GmmSpec, n: int, thr: float, keep_below: bool,
               seed: SeedPath, cfg: GmmConfig) -> np.ndarray:
    if n == 0:
        return np.zeros((0, spec_draw.d))
    out, have, proposed, rnd = [], 0, 0, 0
    chunk = max(256, 2 * n)
    while have < n:
        x = sample_latent(spec_draw, chunk, seed.child(rnd))
        rnd += 1
        proposed += chunk
        nll = mixture_nll(spec_ref, x)
        ok = nll <= thr if keep_below else nll > thr
        out.append(x[ok])
        have += int(ok.sum())
        rate = have / proposed
        if have < n and (proposed >= cfg.max_proposals
                         or (proposed >= 100_000 and rate < cfg.min_acceptance)):
            raise GenerationStalled(
                f"GMM rejection sampling stalled: {have}/{n} accepted after {proposed} proposals"
            )
        chunk = min(max(256, int(1.2 * (n - have) / max(rate, 1e-3))), 1_000_000)
    return np.vstack(out)[:n]


def generate_gmm_dataset(cfg: GmmConfig, n_in: int, n_out: int, seed: SeedPath,
                         d: int | None = None, return_latent: bool = False):
    """Inliers under the NLL threshold, outliers from the inflated mixture above it.

    With ``return_latent`` the pre-transform points are returned alongside
    the dataset so labels can be audited against the original mixture.
    """
    if n_in < 0 or n_out < 0 or n_in + n_out == 0:
        raise ValueError("counts must be >= 0 and not both zero")
    rng = seed.child("hyper").rng()
    spec = sample_gmm_spec(cfg, seed.child("spec"), d=d)
    alpha = float(rng.uniform(1.0 / spec.d, max(cfg.alpha_max, 1.0 / spec.d)))
    s = float(rng.uniform(*cfg.s_range))
    thr = nll_threshold(spec, cfg.quantile, cfg.n_ref, seed.child("threshold"))
    inflated, comp, dims = inflate_subspace(spec, alpha, s, seed.child("inflate"))
    lat_in = _rejection(spec, spec, n_in, thr, True, seed.child("inliers"), cfg)
    lat_out = _rejection(inflated, spec, n_out, thr, False, seed.child("outliers"), cfg)
    latent = np.vstack([lat_in, lat_out])
    meta = {
        "prior": "gmm",
        "archetype": "subspace",
        "seed": seed.to_list(),
        "hyper": {
            "m": spec.m,
            "alpha": alpha,
            "s": s,
            "inflated_component": comp,
            "inflated_dims": dims.tolist(),
            "nll_threshold": thr,
            "quantile": cfg.quantile,
        },
    }
    ds = LabeledDataset.from_parts(apply_affine(spec, lat_in), apply_affine(spec, lat_out), meta)
    if return_latent:
        return ds, latent, spec
    return ds
