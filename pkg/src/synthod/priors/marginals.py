"""Parametric marginal families with closed-form or special-function quantiles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

FAMILIES = ("gaussian", "beta", "exponential", "student_t", "power_law", "log_logistic")


@dataclass(frozen=True)
class MarginalSpec:
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown marginal family {self.family!r}")

    def to_dict(self) -> dict:
        return {"family": self.family, **{k: float(v) for k, v in self.params.items()}}


def sample_marginal(rng: np.random.Generator, family: str | None = None) -> MarginalSpec:
    """Draw a family (uniformly unless given) and its parameters from the default ranges."""
    if family is None:
        family = FAMILIES[int(rng.integers(len(FAMILIES)))]
    if family == "gaussian":
        params = {"mu": rng.uniform(-1, 1), "var": rng.uniform(0.5, 1.0)}
    elif family == "beta":
        params = {"a": rng.uniform(1, 5), "b": rng.uniform(1, 5), "loc": -5.0, "scale": 10.0}
    elif family == "exponential":
        params = {"rate": rng.uniform(0.5, 1.0), "loc": -5.0}
    elif family == "student_t":
        params = {"df": rng.uniform(3, 10), "loc": rng.uniform(-1, 1), "scale": rng.uniform(0.5, 1.0)}
    elif family == "power_law":
        params = {"a": rng.uniform(0.5, 5), "loc": -5.0, "scale": 5.0}
    else:
        params = {"c": rng.uniform(0.5, 5), "loc": -5.0, "scale": 5.0}
    return MarginalSpec(family, {k: float(v) for k, v in params.items()})


def inverse_marginal(u, m: MarginalSpec):
    """Quantile function of ``m`` evaluated at ``u`` in the open interval (0, 1)."""
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u < 1))):
        raise ValueError("domain error: u must lie strictly inside (0, 1)")
    p = m.params
    f = m.family
    if f == "gaussian":
        x = p["mu"] + np.sqrt(p["var"]) * special.ndtri(u)
    elif f == "beta":
        x = p["loc"] + p["scale"] * special.betaincinv(p["a"], p["b"], u)
    elif f == "exponential":
        x = p["loc"] - np.log1p(-u) / p["rate"]
    elif f == "student_t":
        x = p["loc"] + p["scale"] * special.stdtrit(p["df"], u)
    elif f == "power_law":
        # Pareto-type tail: loc + scale * (1 - u)^(-1/a)
        x = p["loc"] + p["scale"] * (1.0 - u) ** (-1.0 / p["a"])
    else:
        x = p["loc"] + p["scale"] * (u / (1.0 - u)) ** (1.0 / p["c"])
    return x if x.ndim else float(x)


def marginal_cdf(x, m: MarginalSpec):
    """CDF of ``m``; used for goodness-of-fit checks."""
    x = np.asarray(x, dtype=float)
    p = m.params
    f = m.family
    if f == "gaussian":
        return special.ndtr((x - p["mu"]) / np.sqrt(p["var"]))
    if f == "beta":
        z = np.clip((x - p["loc"]) / p["scale"], 0, 1)
        return special.betainc(p["a"], p["b"], z)
    if f == "exponential":
        return np.where(x > p["loc"], -np.expm1(-p["rate"] * (x - p["loc"])), 0.0)
    if f == "student_t":
        return special.stdtr(p["df"], (x - p["loc"]) / p["scale"])
    if f == "power_law":
        z = np.maximum((x - p["loc"]) / p["scale"], 1.0)
        return 1.0 - z ** (-p["a"])
    z = np.maximum((x - p["loc"]) / p["scale"], 0.0)
    zc = z ** p["c"]
    return zc / (1.0 + zc)
