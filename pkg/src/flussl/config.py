"""Run configuration: TOML parsing, validation, and exact round-trips.

The config file has four sections: [paths] names the input files and
output directory, [threshold] sets the distance cut and censoring floor,
[sweep] shapes the experiment matrix, and [grids] optionally narrows the
hyperparameter search. Unknown sections or keys are rejected so a typo
never silently falls back to a default. Serialization is hand-rolled to
a canonical layout, and parse(serialize(parse(text))) returns an equal
config, which makes the effective configuration reproducible from its
own printout.

Depth grids use 0 to mean unlimited tree depth, since the file format
has no null; the conversion to the runtime None happens when settings
are built.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import tomli

from .corpus import (
    DEFAULT_CENSORED_FLOOR,
    DEFAULT_THRESHOLD,
    SUBTYPES,
    ThresholdConfig,
)
from .experiment import LEARNERS, PARADIGMS, RunSettings
from .folds import INNER_K, OUTER_K, RATIOS
from .metrics import N_RESAMPLES


class ConfigError(ValueError):
    """Raised for unparseable, unknown, or ill-typed configuration."""


@dataclass
class RunConfig:
    """Validated configuration in file-format terms (depth 0 = unlimited)."""

    sequences: str = ""
    titres: str = ""
    embeddings: tuple[str, ...] = ()
    out: str = "out"
    distance: float = DEFAULT_THRESHOLD
    per_subtype: dict[str, float] = field(default_factory=dict)
    censored_floor: float = DEFAULT_CENSORED_FLOOR
    paradigms: tuple[str, ...] = PARADIGMS
    learners: tuple[str, ...] = LEARNERS
    ratios: tuple[float, ...] = RATIOS
    seed: int = 0
    combine: str = "absdiff-mean"
    outer_k: int = OUTER_K
    inner_k: int = INNER_K
    n_resamples: int = N_RESAMPLES
    threads: int = 1
    rf_n_estimators: tuple[int, ...] | None = None
    rf_max_depths: tuple[int, ...] | None = None
    svm_cs: tuple[float, ...] | None = None
    svm_gammas: tuple[float, ...] | None = None
    st_criteria: tuple[str, ...] | None = None
    st_thresholds: tuple[float, ...] | None = None
    st_k_bests: tuple[int, ...] | None = None
    st_max_iters: tuple[int, ...] | None = None
    ls_alphas: tuple[float, ...] | None = None
    ls_n_neighbors: tuple[int, ...] | None = None
    ls_max_iters: tuple[int, ...] | None = None


_GRID_FIELDS = ("rf_n_estimators", "rf_max_depths", "svm_cs", "svm_gammas",
                "st_criteria", "st_thresholds", "st_k_bests", "st_max_iters",
                "ls_alphas", "ls_n_neighbors", "ls_max_iters")

_INT_GRIDS = {"rf_n_estimators", "rf_max_depths", "st_k_bests",
              "st_max_iters", "ls_n_neighbors", "ls_max_iters"}
_FLOAT_GRIDS = {"svm_cs", "svm_gammas", "st_thresholds", "ls_alphas"}
_STR_GRIDS = {"st_criteria"}

_SECTIONS = {
    "paths": ("sequences", "titres", "embeddings", "out"),
    "threshold": ("distance", "censored_floor", "per_subtype"),
    "sweep": ("paradigms", "learners", "ratios", "seed", "combine",
              "outer_k", "inner_k", "n_resamples", "threads"),
    "grids": _GRID_FIELDS,
}


def _want_str(section: str, key: str, value) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"[{section}] {key} must be a string, "
                          f"got {type(value).__name__}")
    return value


def _want_int(section: str, key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"[{section}] {key} must be an integer, "
                          f"got {value!r}")
    return value


def _want_float(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number, "
                          f"got {value!r}")
    return float(value)


def _want_list(section: str, key: str, value, item) -> tuple:
    if not isinstance(value, list):
        raise ConfigError(f"[{section}] {key} must be a list, got {value!r}")
    return tuple(item(section, key, v) for v in value)


def parse_config(text: str, source: str = "config") -> RunConfig:
    """Parse and validate TOML text into a RunConfig."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None

    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"{source}: unknown sections {unknown}")
    for section, allowed in _SECTIONS.items():
        body = raw.get(section, {})
        if not isinstance(body, dict):
            raise ConfigError(f"{source}: [{section}] must be a table")
        bad = sorted(set(body) - set(allowed))
        if bad:
            raise ConfigError(f"{source}: unknown keys {bad} in [{section}]")

    kw: dict = {}
    paths = raw.get("paths", {})
    for key in ("sequences", "titres", "out"):
        if key in paths:
            kw[key] = _want_str("paths", key, paths[key])
    if "embeddings" in paths:
        kw["embeddings"] = _want_list("paths", "embeddings",
                                      paths["embeddings"], _want_str)

    thr = raw.get("threshold", {})
    if "distance" in thr:
        kw["distance"] = _want_float("threshold", "distance", thr["distance"])
    if "censored_floor" in thr:
        kw["censored_floor"] = _want_float("threshold", "censored_floor",
                                           thr["censored_floor"])
    if "per_subtype" in thr:
        table = thr["per_subtype"]
        if not isinstance(table, dict):
            raise ConfigError(f"{source}: [threshold.per_subtype] must be a table")
        bad = sorted(set(table) - set(SUBTYPES))
        if bad:
            raise ConfigError(
                f"{source}: [threshold.per_subtype] unknown subtypes {bad}")
        kw["per_subtype"] = {
            k: _want_float("threshold.per_subtype", k, v)
            for k, v in sorted(table.items())}

    sweep = raw.get("sweep", {})
    for key in ("paradigms", "learners"):
        if key in sweep:
            kw[key] = _want_list("sweep", key, sweep[key], _want_str)
    if "ratios" in sweep:
        kw["ratios"] = _want_list("sweep", "ratios", sweep["ratios"],
                                  _want_float)
    for key in ("seed", "outer_k", "inner_k", "n_resamples", "threads"):
        if key in sweep:
            kw[key] = _want_int("sweep", key, sweep[key])
    if "combine" in sweep:
        kw["combine"] = _want_str("sweep", "combine", sweep["combine"])

    grids = raw.get("grids", {})
    for key in _GRID_FIELDS:
        if key not in grids:
            continue
        if key in _INT_GRIDS:
            kw[key] = _want_list("grids", key, grids[key], _want_int)
        elif key in _FLOAT_GRIDS:
            kw[key] = _want_list("grids", key, grids[key], _want_float)
        else:
            kw[key] = _want_list("grids", key, grids[key], _want_str)
        if not kw[key]:
            raise ConfigError(f"{source}: [grids] {key} must not be empty")

    cfg = RunConfig(**kw)
    validate_config(cfg, source)
    return cfg


def validate_config(cfg: RunConfig, source: str = "config") -> None:
    """Raise ConfigError on any value the sweep would reject later."""
    try:
        threshold_config(cfg)
        settings_from_config(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if cfg.rf_max_depths is not None:
        bad = [d for d in cfg.rf_max_depths if d < 0]
        if bad:
            raise ConfigError(
                f"{source}: rf_max_depths {bad} negative (0 means unlimited)")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))


def apply_overrides(cfg: RunConfig, seed: int | None = None,
                    out: str | None = None, threads: int | None = None,
                    ratios: tuple[float, ...] | None = None) -> RunConfig:
    """Command-line flags win over file values."""
    kw: dict = {}
    if seed is not None:
        kw["seed"] = seed
    if out is not None:
        kw["out"] = out
    if threads is not None:
        kw["threads"] = threads
    if ratios is not None:
        kw["ratios"] = ratios
    if not kw:
        return cfg
    updated = replace(cfg, **kw)
    validate_config(updated, source="overrides")
    return updated


def threshold_config(cfg: RunConfig) -> ThresholdConfig:
    return ThresholdConfig(default=cfg.distance,
                           per_subtype=dict(cfg.per_subtype))


def settings_from_config(cfg: RunConfig) -> RunSettings:
    """Build sweep settings; depth 0 becomes unlimited (None)."""
    depths = cfg.rf_max_depths
    if depths is not None:
        depths = tuple(None if d == 0 else d for d in depths)
    return RunSettings(
        paradigms=cfg.paradigms, learners=cfg.learners, ratios=cfg.ratios,
        seed=cfg.seed, combine=cfg.combine, outer_k=cfg.outer_k,
        inner_k=cfg.inner_k, n_resamples=cfg.n_resamples,
        threads=cfg.threads, rf_n_estimators=cfg.rf_n_estimators,
        rf_max_depths=depths, svm_cs=cfg.svm_cs, svm_gammas=cfg.svm_gammas,
        st_criteria=cfg.st_criteria, st_thresholds=cfg.st_thresholds,
        st_k_bests=cfg.st_k_bests, st_max_iters=cfg.st_max_iters,
        ls_alphas=cfg.ls_alphas, ls_n_neighbors=cfg.ls_n_neighbors,
        ls_max_iters=cfg.ls_max_iters)


# ---------------------------------------------------------------------------
# Serialization


def _toml_value(value) -> str:
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize {value!r}")


def config_to_toml(cfg: RunConfig) -> str:
    """Canonical TOML text; parse_config(config_to_toml(c)) == c."""
    lines = ["[paths]"]
    lines.append(f"sequences = {_toml_value(cfg.sequences)}")
    lines.append(f"titres = {_toml_value(cfg.titres)}")
    lines.append(f"embeddings = {_toml_value(cfg.embeddings)}")
    lines.append(f"out = {_toml_value(cfg.out)}")
    lines.append("")
    lines.append("[threshold]")
    lines.append(f"distance = {_toml_value(float(cfg.distance))}")
    lines.append(f"censored_floor = {_toml_value(float(cfg.censored_floor))}")
    if cfg.per_subtype:
        lines.append("")
        lines.append("[threshold.per_subtype]")
        for name in sorted(cfg.per_subtype):
            lines.append(f"{name} = {_toml_value(float(cfg.per_subtype[name]))}")
    lines.append("")
    lines.append("[sweep]")
    lines.append(f"paradigms = {_toml_value(cfg.paradigms)}")
    lines.append(f"learners = {_toml_value(cfg.learners)}")
    lines.append(f"ratios = {_toml_value(cfg.ratios)}")
    lines.append(f"seed = {cfg.seed}")
    lines.append(f"combine = {_toml_value(cfg.combine)}")
    lines.append(f"outer_k = {cfg.outer_k}")
    lines.append(f"inner_k = {cfg.inner_k}")
    lines.append(f"n_resamples = {cfg.n_resamples}")
    lines.append(f"threads = {cfg.threads}")
    grid_lines = [f"{key} = {_toml_value(getattr(cfg, key))}"
                  for key in _GRID_FIELDS if getattr(cfg, key) is not None]
    if grid_lines:
        lines.append("")
        lines.append("[grids]")
        lines.extend(grid_lines)
    return "\n".join(lines) + "\n"


def config_to_dict(cfg: RunConfig) -> dict:
    """JSON-ready echo of the effective configuration."""
    doc: dict = {}
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = list(value)
        elif isinstance(value, dict):
            value = dict(sorted(value.items()))
        doc[f.name] = value
    return doc
