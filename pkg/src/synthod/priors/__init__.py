"""Synthetic data priors and a registry keyed by outlier archetype."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..core import LabeledDataset, SeedPath
from .copula import CopulaConfig, CopulaOutlierConfig, generate_copula_dataset
from .gmm import GmmConfig, generate_gmm_dataset
from .scm import ScmConfig, generate_scm_dataset

ARCHETYPES = (
    "gmm",
    "copula-dependence",
    "copula-probabilistic",
    "scm-structural",
    "scm-measurement",
)


@dataclass(frozen=True)
class PriorConfigs:
    gmm: GmmConfig = GmmConfig()
    scm: ScmConfig = ScmConfig()
    copula: CopulaConfig = CopulaConfig()
    copula_outliers: CopulaOutlierConfig = CopulaOutlierConfig()


def generator(name: str, cfgs: PriorConfigs = PriorConfigs()) -> Callable[..., LabeledDataset]:
    """Return ``gen(n_in, n_out, seed, d=None) -> LabeledDataset`` for an archetype."""
    if name == "gmm":
        return lambda n_in, n_out, seed, d=None: generate_gmm_dataset(cfgs.gmm, n_in, n_out, seed, d=d)
    if name.startswith("scm-"):
        arch = name[4:]
        return lambda n_in, n_out, seed, d=None: generate_scm_dataset(cfgs.scm, arch, n_in, n_out, seed, d=d)
    if name.startswith("copula-"):
        arch = name[7:]
        return lambda n_in, n_out, seed, d=None: generate_copula_dataset(
            cfgs.copula, arch, n_in, n_out, seed, d=d, out_cfg=cfgs.copula_outliers)
    raise KeyError(f"unknown archetype {name!r}; expected one of {ARCHETYPES}")


def contamination_range(name: str, cfgs: PriorConfigs = PriorConfigs()) -> tuple[float, float]:
    if name == "gmm":
        return cfgs.gmm.contamination_range
    if name.startswith("scm-"):
        return cfgs.scm.contamination_range
    return cfgs.copula.contamination_range


def d_range(name: str, cfgs: PriorConfigs = PriorConfigs()) -> tuple[int, int]:
    if name == "gmm":
        return cfgs.gmm.d_range
    if name.startswith("scm-"):
        return cfgs.scm.d_range
    return cfgs.copula.d_range


def outlier_count(n_in: int, r: float) -> int:
    """Outliers needed so that they make up fraction ``r`` of the dataset."""
    return max(1, int(round(r / (1 - r) * n_in)))


def draw_dataset(name: str, seed: SeedPath, n_in: int = 1000, d: int | None = None,
                 cfgs: PriorConfigs = PriorConfigs()) -> LabeledDataset:
    """Generate one dataset with contamination drawn from the prior's range."""
    rng = seed.child("contamination").rng()
    r = float(rng.uniform(*contamination_range(name, cfgs)))
    ds = generator(name, cfgs)(n_in, outlier_count(n_in, r), seed.child("data"), d=d)
    ds.meta["target_contamination"] = r
    return ds
