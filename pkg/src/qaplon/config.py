"""Study configuration: an INI file with one section per pipeline stage."""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field, fields, replace

from .generators import CLASSES, GeneratorParams
from .heuristics import GaConfig, SaConfig
from .lon import DEFAULT_MAX_N


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AutocorrParams:
    walk_length: int = 1_000_000
    n_walks: int = 10
    s_max: int = 0  # 0: n * n
    epsilon: float | None = None  # None: 2 / sqrt(walk_length)

    def resolved_s_max(self, n):
        return self.s_max if self.s_max > 0 else n * n


@dataclass(frozen=True)
class MetricParams:
    mcl_inflation: float = 2.0
    mcl_prune: float = 1e-5
    mcl_tol: float = 1e-8
    mcl_max_iter: int = 200


@dataclass(frozen=True)
class StudyConfig:
    classes: tuple = CLASSES
    sizes: tuple = (8, 9)
    instances_per_class: int = 30
    runs_per_algorithm: int = 100
    master_seed: int = 2012
    output: str = "study-out"
    workers: int = 1
    max_n: int = DEFAULT_MAX_N
    dump_runs: bool = False
    dump_autocorr: bool = False
    generator: GeneratorParams = field(default_factory=GeneratorParams)
    autocorr: AutocorrParams = field(default_factory=AutocorrParams)
    metrics: MetricParams = field(default_factory=MetricParams)
    sa: SaConfig = field(default_factory=SaConfig)
    ga: GaConfig = field(default_factory=GaConfig)

    def __post_init__(self):
        bad = [c for c in self.classes if c not in CLASSES]
        if bad or not self.classes:
            raise ConfigError(f"classes must be a non-empty subset of {CLASSES}, got {self.classes}")
        if not self.sizes or any(not 2 <= n <= self.max_n for n in self.sizes):
            raise ConfigError(f"sizes must lie in [2, {self.max_n}], got {self.sizes}")
        if self.instances_per_class < 1 or self.runs_per_algorithm < 1 or self.workers < 1:
            raise ConfigError("instances_per_class, runs_per_algorithm and workers must be >= 1")


# section -> (key, parser) for the flat [study] keys
_STUDY_KEYS = {
    "classes": lambda v: tuple(x.strip() for x in v.split(",") if x.strip()),
    "sizes": lambda v: tuple(int(x) for x in v.split(",") if x.strip()),
    "instances_per_class": int,
    "runs_per_algorithm": int,
    "master_seed": int,
    "output": str,
    "workers": int,
    "max_n": int,
    "dump_runs": lambda v: _bool(v),
    "dump_autocorr": lambda v: _bool(v),
}
_SECTIONS = {
    "generator": ("generator", GeneratorParams, {"cls", "n", "seed"}),
    "autocorr": ("autocorr", AutocorrParams, set()),
    "metrics": ("metrics", MetricParams, set()),
    "sa": ("sa", SaConfig, set()),
    "ga": ("ga", GaConfig, set()),
}
# keys excluded from the content hash: they do not change any result
_UNHASHED = {"output", "workers"}


def _bool(v):
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _convert(dc_type, name, raw):
    kind = {f.name: f.type for f in fields(dc_type)}[name]
    raw = raw.strip()
    if "None" in str(kind) and raw in ("", "none", "auto"):
        return None
    if "int" in str(kind) and "float" not in str(kind):
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    if "float" in str(kind):
        return float(raw)
    return raw


def parse_config(text: str, base: StudyConfig | None = None) -> StudyConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    cfg = base or StudyConfig()
    updates = {}
    try:
        for section in cp.sections():
            if section == "study":
                for key, raw in cp.items(section):
                    if key not in _STUDY_KEYS:
                        raise ConfigError(f"unknown key [study] {key}")
                    updates[key] = _STUDY_KEYS[key](raw)
            elif section in _SECTIONS:
                attr, dc_type, hidden = _SECTIONS[section]
                known = {f.name for f in fields(dc_type)} - hidden
                sub = {}
                for key, raw in cp.items(section):
                    if key not in known:
                        raise ConfigError(f"unknown key [{section}] {key}")
                    sub[key] = _convert(dc_type, key, raw)
                updates[attr] = replace(getattr(cfg, attr), **sub)
            else:
                raise ConfigError(f"unknown section [{section}]")
        return replace(cfg, **updates)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, **overrides) -> StudyConfig:
    cfg = StudyConfig()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            cfg = parse_config(fh.read(), cfg)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    try:
        return replace(cfg, **overrides)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    if v is None:
        return "auto"
    if isinstance(v, float) and math.isfinite(v):
        return repr(v)
    return str(v)


def dump_config(cfg: StudyConfig, hashed_only: bool = False) -> str:
    """Resolved configuration as INI text (stable key order)."""
    cp = configparser.ConfigParser()
    cp["study"] = {k: _fmt(getattr(cfg, k)) for k in _STUDY_KEYS
                   if not (hashed_only and k in _UNHASHED)}
    for section, (attr, dc_type, hidden) in _SECTIONS.items():
        sub = getattr(cfg, attr)
        cp[section] = {f.name: _fmt(getattr(sub, f.name)) for f in fields(dc_type) if f.name not in hidden}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def config_hash(cfg: StudyConfig) -> str:
    return hashlib.sha256(dump_config(cfg, hashed_only=True).encode()).hexdigest()


def section_hash(cfg: StudyConfig, *parts) -> str:
    """Content hash of selected config sections plus arbitrary extra inputs."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, str) and part in _SECTIONS:
            attr = _SECTIONS[part][0]
            h.update(repr(sorted(vars(getattr(cfg, attr)).items())).encode())
        elif isinstance(part, bytes):
            h.update(part)
        else:
            h.update(repr(part).encode())
        h.update(b"\x00")
    return h.hexdigest()
