"""Bivariate pair-copulas used on the edges of a D-vine.

Each family exposes its conditional distribution ``h(v | u) = dC(u, v)/du``
and its inverse in ``v``; sampling a pair is ``v = h_inv(w | u)`` with ``u``
and ``w`` independent uniforms. Parameters are set from Kendall's tau.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate, optimize, special

PAIR_FAMILIES = ("gaussian", "student", "clayton", "gumbel", "frank", "joe")
STUDENT_DF = 4.0
_EPS = 1e-12


def _clip(u):
    return np.clip(u, _EPS, 1 - _EPS)


def _debye1(theta: float) -> float:
    if theta == 0:
        return 1.0
    val, _ = integrate.quad(lambda t: t / np.expm1(t) if t > 0 else 1.0, 0, theta)
    return val / theta


def frank_tau(theta: float) -> float:
    return 1 - 4 / theta * (1 - _debye1(theta))


def joe_tau(theta: float) -> float:
    if theta <= 1:
        return 0.0
    # 1 - 4 * sum_k 1/(k (theta k + 2) (theta (k - 1) + 2)); tail is O(1/K^2)
    k = np.arange(1, 200_000, dtype=float)
    s = np.sum(1.0 / (k * (theta * k + 2) * (theta * (k - 1) + 2)))
    return 1 - 4 * s


def param_from_tau(family: str, tau: float) -> float:
    """Copula parameter matching a Kendall's tau in (0, 1)."""
    if family in ("gaussian", "student"):
        return float(np.sin(np.pi * tau / 2))
    if family == "clayton":
        return 2 * tau / (1 - tau)
    if family == "gumbel":
        return 1 / (1 - tau)
    if family == "frank":
        return float(optimize.brentq(lambda t: frank_tau(t) - tau, 1e-6, 200.0, xtol=1e-12))
    if family == "joe":
        return float(optimize.brentq(lambda t: joe_tau(t) - tau, 1.0 + 1e-9, 200.0, xtol=1e-12))
    raise ValueError(f"unknown pair-copula family {family!r}")


def h_func(family: str, theta: float, v, u):
    """Conditional CDF P(V <= v | U = u)."""
    u, v = _clip(np.asarray(u, float)), _clip(np.asarray(v, float))
    if family == "independence":
        return v
    if family == "gaussian":
        return special.ndtr((special.ndtri(v) - theta * special.ndtri(u)) / np.sqrt(1 - theta**2))
    if family == "student":
        nu = STUDENT_DF
        tu, tv = special.stdtrit(nu, u), special.stdtrit(nu, v)
        scale = np.sqrt((nu + tu**2) * (1 - theta**2) / (nu + 1))
        return special.stdtr(nu + 1, (tv - theta * tu) / scale)
    if family == "clayton":
        return u ** (-theta - 1) * (u**-theta + v**-theta - 1) ** (-1 - 1 / theta)
    if family == "gumbel":
        lu, lv = -np.log(u), -np.log(v)
        a = (lu**theta + lv**theta) ** (1 / theta)
        return np.exp(-a) * a ** (1 - theta) * lu ** (theta - 1) / u
    if family == "frank":
        eu, ev, e1 = np.expm1(-theta * u), np.expm1(-theta * v), np.expm1(-theta)
        return (eu + 1) * ev / (e1 + eu * ev)
    if family == "joe":
        ou, ov = (1 - u) ** theta, (1 - v) ** theta
        return (ou + ov - ou * ov) ** (1 / theta - 1) * (1 - u) ** (theta - 1) * (1 - ov)
    raise ValueError(f"unknown pair-copula family {family!r}")


def h_inverse(family: str, theta: float, w, u):
    """Solve ``h(v | u) = w`` for ``v``."""
    u, w = _clip(np.asarray(u, float)), _clip(np.asarray(w, float))
    if family == "independence":
        return w
    if family == "gaussian":
        return special.ndtr(special.ndtri(w) * np.sqrt(1 - theta**2) + theta * special.ndtri(u))
    if family == "student":
        nu = STUDENT_DF
        tu = special.stdtrit(nu, u)
        scale = np.sqrt((nu + tu**2) * (1 - theta**2) / (nu + 1))
        return special.stdtr(nu, special.stdtrit(nu + 1, w) * scale + theta * tu)
    if family == "clayton":
        return ((w * u ** (theta + 1)) ** (-theta / (1 + theta)) + 1 - u**-theta) ** (-1 / theta)
    if family == "frank":
        e1 = np.expm1(-theta)
        eu = np.exp(-theta * u)
        return -np.log1p(w * e1 / (w + (1 - w) * eu)) / theta
    # Gumbel and Joe: h is increasing in v, so bisect
    return _bisect_inverse(family, theta, w, u)


def _bisect_inverse(family, theta, w, u, iters=60):
    lo = np.full(np.broadcast(w, u).shape, _EPS)
    hi = np.full_like(lo, 1 - _EPS)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = h_func(family, theta, mid, u) < w
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)

