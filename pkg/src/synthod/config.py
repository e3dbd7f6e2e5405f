"""INI run configuration.

Each section fills one dataclass; keys are its field names. Range values are
written ``lo, hi`` and lists as comma-separated words. Example::

    [run]
    seed = 7
    n_in = 1000

    [gmm]
    m_range = 1, 3

    [sec]
    policy = sec
    batch_points = 2000

    [curriculum]
    tau = 0.5
    bins = 2-11, 11-21
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .core import ConfigError
from .curriculum import DIM_BINS, PaceConfig, SecConfig
from .detectors.ensemble import EnsembleConfig
from .detectors.iforest import IForestConfig
from .detectors.learner import LearnerConfig
from .priors import ARCHETYPES, PriorConfigs
from .priors.copula import CopulaConfig, CopulaOutlierConfig
from .priors.gmm import GmmConfig
from .priors.scm import ScmConfig


@dataclass(frozen=True)
class RunSettings:
    seed: int = 0
    n_in: int = 1000
    count: int = 10
    checkpoint_every: int = 10
    context_fraction: float = 0.5

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.n_in < 1 or self.count < 1 or self.checkpoint_every < 1:
            raise ConfigError("n_in, count and checkpoint_every must be >= 1")
        if not 0 < self.context_fraction < 1:
            raise ConfigError("context_fraction must be in (0, 1)")


@dataclass(frozen=True)
class CurriculumSettings:
    tau: float = 0.5
    gamma: float = 0.1
    priors: tuple[str, ...] = ARCHETYPES
    bins: tuple[tuple[int, int], ...] = DIM_BINS

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if not 0 < self.gamma <= 1:
            raise ConfigError("gamma must be in (0, 1]")
        bad = set(self.priors) - set(ARCHETYPES)
        if bad:
            raise ConfigError(f"unknown priors {sorted(bad)}")
        for lo, hi in self.bins:
            if not 2 <= lo < hi <= 101:
                raise ConfigError(f"dimension bin [{lo}, {hi}) outside [2, 101)")


@dataclass(frozen=True)
class RunConfig:
    run: RunSettings = field(default_factory=RunSettings)
    gmm: GmmConfig = field(default_factory=GmmConfig)
    scm: ScmConfig = field(default_factory=ScmConfig)
    copula: CopulaConfig = field(default_factory=CopulaConfig)
    copula_outliers: CopulaOutlierConfig = field(default_factory=CopulaOutlierConfig)
    curriculum: CurriculumSettings = field(default_factory=CurriculumSettings)
    sec: SecConfig = field(default_factory=SecConfig)
    pace: PaceConfig = field(default_factory=PaceConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    iforest: IForestConfig = field(default_factory=IForestConfig)

    @property
    def priors(self) -> PriorConfigs:
        return PriorConfigs(self.gmm, self.scm, self.copula, self.copula_outliers)

    @property
    def sec_config(self) -> SecConfig:
        return replace(self.sec, pace=self.pace)


def _parse_scalar(text: str, like):
    text = text.strip()
    if isinstance(like, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def _parse_value(text: str, default):
    if isinstance(default, tuple):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if default and isinstance(default[0], tuple):
            out = []
            for p in parts:
                lo, hi = p.split("-")
                out.append((int(lo), int(hi)))
            return tuple(out)
        if default and isinstance(default[0], (int, float)) and not isinstance(default[0], bool):
            # ranges: ints stay ints only when every default entry is an int
            kind = int if all(isinstance(v, int) for v in default) else float
            return tuple(kind(p) for p in parts)
        return tuple(parts)
    if default is None:
        return None if text.strip().lower() in ("", "none") else int(text)
    return _parse_scalar(text, default)


def _build(cls, section: configparser.SectionProxy | None, name: str):
    if section is None:
        return cls()
    known = {f.name: f for f in fields(cls) if not dataclasses.is_dataclass(f.default)}
    defaults = cls()
    kwargs = {}
    for key, text in section.items():
        if key not in known:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        try:
            kwargs[key] = _parse_value(text, getattr(defaults, key))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{name}] {key}: {exc}") from None
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"[{name}] {exc}") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def load_config(path=None, text: str | None = None) -> RunConfig:
    """Read and range-check a run configuration. Missing sections keep defaults."""
    cp = configparser.ConfigParser()
    try:
        if text is not None:
            cp.read_string(text)
        elif path is not None:
            if not Path(path).is_file():
                raise ConfigError(f"config file not found: {path}")
            cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None
    sections = {f.name: f.type for f in fields(RunConfig)}
    unknown = set(cp.sections()) - set(sections)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    built = {}
    for f in fields(RunConfig):
        cls = f.default_factory().__class__
        built[f.name] = _build(cls, cp[f.name] if cp.has_section(f.name) else None, f.name)
    return RunConfig(**built)
