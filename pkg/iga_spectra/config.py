"""
Experiment configuration: TOML loading, validation and echo
"""

import json
import logging
import tomllib
from dataclasses import dataclass, field, replace
from pathlib import Path

from .constants import (
    DEFAULT_SEED,
    DENSE_THRESHOLD,
    DOMAIN_DIMENSION,
    DOMAINS,
    SC_MAX_DEGREE,
    SC_MIN_DEGREE,
    SCHEMES,
    TARGETS,
)
from .errors import ConfigError, DomainError
from .geometry import make_patch
from .lsq_solver import MANUFACTURED_CASES
from .sweep_lab import FIT_MODELS, FIT_VARIABLES, FIT_QUANTITIES, LAWS

logger = logging.getLogger(__name__)

K_MODES = ("cp-1", "c1")

EXPERIMENT_KEYS = ("domain", "scheme", "targets", "output", "dense_threshold", "seed", "threads", "source")
GRID_KEYS = ("p", "n", "k", "factor")
FIT_KEYS = ("label", "x", "y", "model", "target", "law")


@dataclass(frozen=True)
class FitSpec:
    label: str
    x: str
    y: str = "cond"
    model: str = None
    target: str = "A"
    law: str = None


@dataclass(frozen=True)
class GridPoint:
    p: int
    n: int
    k: int
    factor: float
    scheme: str

    @property
    def h(self):
        return 1.0 / self.n


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """
    One reproducible experiment

    Grid axes are expanded in the order p, n, k, factor, scheme.
    """
    domain: str
    p: tuple
    n: tuple
    k: tuple = ("cp-1",)
    factor: tuple = (4.0,)
    schemes: tuple = ("greville",)
    targets: tuple = TARGETS
    geometry: dict = field(default_factory=dict)
    output: str = "results"
    dense_threshold: int = DENSE_THRESHOLD
    seed: int = DEFAULT_SEED
    threads: int = 1
    source: str = "zero"
    fits: tuple = ()

    @property
    def dim(self):
        return DOMAIN_DIMENSION[self.domain]

    def grid(self):
        return [
            GridPoint(p=p, n=n, k=resolve_regularity(mode, p), factor=float(factor), scheme=scheme)
            for p in self.p
            for n in self.n
            for mode in self.k
            for factor in self.factor
            for scheme in self.schemes
        ]


def resolve_regularity(mode, p):
    """Regularity k for a mode: 'cp-1' is maximal smoothness, 'c1' is C^1, an integer is literal"""
    if mode == "cp-1":
        return p - 1
    if mode == "c1":
        return 1
    return int(mode)


def _as_tuple(value):
    return tuple(value) if isinstance(value, (list, tuple)) else (value,)


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _check_keys(table, allowed, prefix):
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{prefix}.{key}", f"unknown key, expected one of {allowed}")


def _require(table, key, prefix):
    if key not in table:
        raise ConfigError(f"{prefix}.{key}", "missing required key")
    return table[key]


def validate_config(config):
    """
    Check every grid value against the preconditions of the module that consumes it

    Raises ConfigError naming the offending key.
    """
    if config.domain not in DOMAINS:
        raise ConfigError("experiment.domain", f"unknown domain '{config.domain}', expected one of {DOMAINS}")
    try:
        make_patch(config.domain, config.geometry)
    except DomainError as exc:
        raise ConfigError("geometry", str(exc)) from exc

    if not config.p or not all(_is_int(p) and p >= 1 for p in config.p):
        raise ConfigError("grid.p", f"degrees must be integers >= 1, got {list(config.p)}")
    if not config.n or not all(_is_int(n) and n >= 1 for n in config.n):
        raise ConfigError("grid.n", f"span counts must be integers >= 1, got {list(config.n)}")
    if not config.factor or not all(isinstance(f, (int, float)) and not isinstance(f, bool) and f >= 1.0
                                     for f in config.factor):
        raise ConfigError("grid.factor", f"oversampling factors must be >= 1, got {list(config.factor)}")
    if not config.k:
        raise ConfigError("grid.k", "at least one regularity mode is required")
    for mode in config.k:
        if mode not in K_MODES and not _is_int(mode):
            raise ConfigError("grid.k", f"regularity must be one of {K_MODES} or an integer, got {mode!r}")
        for p in config.p:
            k = resolve_regularity(mode, p)
            if not 0 <= k <= p - 1:
                raise ConfigError("grid.k", f"mode {mode!r} gives k={k}, outside 0..{p - 1} for p={p}")

    if not config.schemes or any(s not in SCHEMES for s in config.schemes):
        raise ConfigError("experiment.scheme", f"schemes must be among {SCHEMES}, got {list(config.schemes)}")
    if any(s in ("sc", "cg") for s in config.schemes):
        bad = [p for p in config.p if not SC_MIN_DEGREE <= p <= SC_MAX_DEGREE]
        if bad:
            raise ConfigError(
                "grid.p", f"superconvergent schemes need {SC_MIN_DEGREE} <= p <= {SC_MAX_DEGREE}, got {bad}"
            )
    if not config.targets or any(t not in TARGETS for t in config.targets):
        raise ConfigError("experiment.targets", f"targets must be among {TARGETS}, got {list(config.targets)}")
    if config.source not in MANUFACTURED_CASES:
        raise ConfigError("experiment.source", f"unknown source '{config.source}', expected one of {sorted(MANUFACTURED_CASES)}")
    if not isinstance(config.output, str) or not config.output:
        raise ConfigError("experiment.output", "output must be a non-empty path")
    if not _is_int(config.dense_threshold) or config.dense_threshold < 0:
        raise ConfigError("experiment.dense_threshold", f"must be an integer >= 0, got {config.dense_threshold!r}")
    if not _is_int(config.seed):
        raise ConfigError("experiment.seed", f"must be an integer, got {config.seed!r}")
    if not _is_int(config.threads) or config.threads < 1:
        raise ConfigError("experiment.threads", f"must be an integer >= 1, got {config.threads!r}")

    for i, fit in enumerate(config.fits):
        key = f"fit[{i}]"
        if fit.x not in FIT_VARIABLES:
            raise ConfigError(f"{key}.x", f"must be one of {FIT_VARIABLES}, got {fit.x!r}")
        if fit.y not in FIT_QUANTITIES:
            raise ConfigError(f"{key}.y", f"must be one of {FIT_QUANTITIES}, got {fit.y!r}")
        if fit.model is not None and (fit.model not in FIT_MODELS or not fit.model.endswith(f"_{fit.x}")):
            raise ConfigError(f"{key}.model", f"model {fit.model!r} does not fit x={fit.x}")
        if fit.target not in TARGETS:
            raise ConfigError(f"{key}.target", f"must be one of {TARGETS}, got {fit.target!r}")
        if fit.law is not None and fit.law not in LAWS:
            raise ConfigError(f"{key}.law", f"unknown reference law {fit.law!r}")
    return config


def parse_config(data):
    """Build and validate an ExperimentConfig from a parsed TOML document"""
    _check_keys(data, ("experiment", "geometry", "grid", "fit"), "config")
    experiment = _require(data, "experiment", "config")
    grid = _require(data, "grid", "config")
    _check_keys(experiment, EXPERIMENT_KEYS, "experiment")
    _check_keys(grid, GRID_KEYS, "grid")

    fits = []
    for i, table in enumerate(data.get("fit", [])):
        _check_keys(table, FIT_KEYS, f"fit[{i}]")
        x = _require(table, "x", f"fit[{i}]")
        fits.append(FitSpec(
            label=str(table.get("label", f"fit{i}")),
            x=x,
            y=table.get("y", "cond"),
            model=table.get("model"),
            target=table.get("target", "A"),
            law=table.get("law"),
        ))

    config = ExperimentConfig(
        domain=_require(experiment, "domain", "experiment"),
        p=_as_tuple(_require(grid, "p", "grid")),
        n=_as_tuple(_require(grid, "n", "grid")),
        k=_as_tuple(grid.get("k", "cp-1")),
        factor=tuple(float(f) if _is_int(f) else f for f in _as_tuple(grid.get("factor", 4.0))),
        schemes=_as_tuple(experiment.get("scheme", "greville")),
        targets=_as_tuple(experiment.get("targets", list(TARGETS))),
        geometry=dict(data.get("geometry", {})),
        output=experiment.get("output", "results"),
        dense_threshold=experiment.get("dense_threshold", DENSE_THRESHOLD),
        seed=experiment.get("seed", DEFAULT_SEED),
        threads=experiment.get("threads", 1),
        source=experiment.get("source", "zero"),
        fits=tuple(fits),
    )
    return validate_config(config)


def load_config(path):
    """
    Read and validate an experiment TOML file

    Raises ConfigError for a missing file, a syntax error or an invalid value.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{path}: {exc}") from exc
    config = parse_config(data)
    logger.debug("loaded %s: %d grid points", path, len(config.grid()))
    return config


def with_overrides(config, **overrides):
    """Apply command-line overrides (None means keep the file value) and revalidate"""
    changes = {key: value for key, value in overrides.items() if value is not None}
    return validate_config(replace(config, **changes)) if changes else config


def config_to_dict(config):
    experiment = {
        "domain": config.domain,
        "scheme": list(config.schemes),
        "targets": list(config.targets),
        "output": config.output,
        "dense_threshold": config.dense_threshold,
        "seed": config.seed,
        "threads": config.threads,
        "source": config.source,
    }
    grid = {
        "p": list(config.p),
        "n": list(config.n),
        "k": list(config.k),
        "factor": list(config.factor),
    }
    data = {"experiment": experiment, "grid": grid}
    if config.geometry:
        data["geometry"] = dict(config.geometry)
    if config.fits:
        data["fit"] = [
            {key: getattr(fit, key) for key in FIT_KEYS if getattr(fit, key) is not None}
            for fit in config.fits
        ]
    return data


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot write {type(value).__name__} as TOML")


def toml_table(header, table):
    lines = [header]
    lines.extend(f"{key} = {_toml_value(value)}" for key, value in table.items())
    return lines


def config_to_toml(config):
    """
    TOML text of a configuration; parse_config(tomllib.loads(text)) restores it
    """
    data = config_to_dict(config)
    lines = toml_table("[experiment]", data["experiment"])
    if "geometry" in data:
        lines += [""] + toml_table("[geometry]", data["geometry"])
    lines += [""] + toml_table("[grid]", data["grid"])
    for fit in data.get("fit", []):
        lines += [""] + toml_table("[[fit]]", fit)
    return "\n".join(lines) + "\n"
