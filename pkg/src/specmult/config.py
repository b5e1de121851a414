"""Experiment configuration: JSON schema, built-in models and defaults."""

from __future__ import annotations

import copy
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .operator_models import (
    DisorderSpec,
    LatticeSpec,
    Model,
    ModelError,
    ProjectionScheme,
    anderson_1d_model,
    remark_stacked_model,
    stacked_model,
    trivial_minami_model,
)

SCHEMA_VERSION = 1
KINDS = ("multiplicity", "minami", "stats", "green-check", "kernel-check", "counterexample")

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


BUILTIN_MODELS: dict[str, dict[str, Any]] = {
    "remark-stacked-5": {"L": 60, "disorder": {"family": "uniform", "params": [0.0, 1.0]}},
    "stacked-3": {"L": 100, "M": 3, "disorder": {"family": "gaussian", "params": [0.0, 1.0]}},
    "trivial-minami": {"L": 100, "disorder": {"family": "gaussian", "params": [0.0, 1.0]}},
    "anderson-1d-rank1": {"L": 500, "disorder": {"family": "uniform", "params": [-5.0, 5.0]}},
}

DEFAULT_MODEL = {
    "multiplicity": "remark-stacked-5",
    "counterexample": "remark-stacked-5",
    "stats": "stacked-3",
    "minami": "anderson-1d-rank1",
    "green-check": None,
    "kernel-check": None,
}

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "multiplicity": {
        "realizations": 20,
        "delta_rel": 1e-8,
        "windows": [],
    },
    "counterexample": {
        "realizations": 20,
        "delta_rel": 1e-8,
        "windows": [
            {"lo": 3.05, "hi": 4.95, "exact_count": 3},
            {"lo": -1.95, "hi": 2.95, "min_count": 2},
        ],
        "restriction_trials": 5,
    },
    "stats": {
        "realizations": 2000,
        "columns_per_region": 10,
        "energy": 0.0,
        "window_constant": 3.0,
        "expect": "auto",
        "tv_threshold": 0.05,
        "mean_range": [0.5, 2.0],
        "negligibility_max": 0.2,
    },
    "minami": {
        "realizations": 2000,
        "region_columns": [20, 40],
        "lengths": [0.04, 0.02, 0.01],
        "energy": 0.0,
        "K": 1,
        "a": 2.0,
        "b": 1.0,
        "constant": None,
        "contrast_model": "stacked-3",
        "contrast_region_columns": 20,
        "contrast_min_growth": 5.0,
    },
    "green-check": {
        "instances": 100,
        "size": 50,
        "block_size": 3,
        "min_imag": 0.1,
        "herglotz_models": 10,
        "herglotz_grid": 20,
        "herglotz_size": 50,
    },
    "kernel-check": {
        "instances": 50,
        "tol": 1e-7,
    },
}

MODEL_KEYS = ("geometry", "boundary", "hoppings", "onsite", "blocks", "disorder")
TOP_KEYS = ("schema_version", "experiment", "seed", "model", "params") + MODEL_KEYS


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    master_seed: int
    model_section: dict | None
    params: dict

    def model(self) -> Model | None:
        return None if self.model_section is None else build_model(self.model_section)

    def resolved(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.kind,
            "seed": self.master_seed,
            "model": self.model_section,
            "params": self.params,
        }

    def digest(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _disorder(section: Any, key: str = "disorder") -> DisorderSpec:
    if not isinstance(section, dict) or set(section) - {"family", "params"}:
        raise ConfigError(key, "expected {family, params}")
    try:
        return DisorderSpec(section["family"], tuple(section["params"]))
    except KeyError as exc:
        raise ConfigError(f"{key}.{exc.args[0]}", "missing") from exc
    except (ModelError, TypeError) as exc:
        raise ConfigError(key, str(exc)) from exc


def _resolve_builtin(name: str, overrides: dict) -> dict:
    if name not in BUILTIN_MODELS:
        raise ConfigError("model", f"unknown built-in model {name!r}; choose from {sorted(BUILTIN_MODELS)}")
    section = copy.deepcopy(BUILTIN_MODELS[name])
    for key, value in overrides.items():
        if key not in section and key != "boundary":
            raise ConfigError(f"model.{key}", f"not an option of {name}")
        section[key] = value
    section["name"] = name
    return section


def build_model(section: dict) -> Model:
    """Instantiate a model section (built-in or explicit)."""
    try:
        if "name" in section:
            name = section["name"]
            disorder = _disorder(section["disorder"], "model.disorder")
            boundary = section.get("boundary", "dirichlet")
            if name == "remark-stacked-5":
                return remark_stacked_model(int(section["L"]), disorder, boundary)
            if name == "stacked-3":
                return stacked_model(int(section["L"]), int(section["M"]), 1.0, disorder, boundary)
            if name == "trivial-minami":
                return trivial_minami_model(int(section["L"]), disorder)
            return anderson_1d_model(int(section["L"]), disorder, boundary)
        return _explicit_model(section)
    except ModelError as exc:
        raise ConfigError("model", str(exc)) from exc


def _explicit_model(section: dict) -> Model:
    geom = section.get("geometry")
    if not isinstance(geom, dict) or "kind" not in geom:
        raise ConfigError("geometry", "expected an object with a 'kind'")
    kind = geom["kind"]
    hoppings = tuple(section.get("hoppings", [1.0]))
    boundary = section.get("boundary", "dirichlet")
    onsite = tuple(section.get("onsite", ()))
    try:
        if kind == "chain":
            extents = (int(geom["L"]),)
        elif kind == "box":
            extents = tuple(int(s) for s in geom["sides"])
        elif kind == "layered_chain":
            extents = (int(geom["L"]), len(hoppings))
            if "M" in geom and int(geom["M"]) != len(hoppings):
                raise ConfigError("hoppings", "layered_chain needs one hopping per layer")
        else:
            raise ConfigError("geometry.kind", f"unknown geometry {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"geometry.{exc.args[0]}", "missing") from exc
    try:
        lattice = LatticeSpec(kind, extents, hoppings, boundary, onsite)
    except ModelError as exc:
        raise ConfigError("geometry", str(exc)) from exc
    blocks = section.get("blocks", {"rank_k_columns": 1})
    try:
        if isinstance(blocks, dict):
            if set(blocks) != {"rank_k_columns"}:
                raise ConfigError("blocks", "shorthand form is {rank_k_columns: k}")
            scheme = ProjectionScheme.columns(lattice, int(blocks["rank_k_columns"]))
        elif isinstance(blocks, list):
            scheme = ProjectionScheme.from_lists(blocks, lattice.n_sites)
        else:
            raise ConfigError("blocks", "expected {rank_k_columns: k} or a list of index lists")
    except ModelError as exc:
        raise ConfigError("blocks", str(exc)) from exc
    if "disorder" not in section:
        raise ConfigError("disorder", "missing")
    return Model(lattice, scheme, _disorder(section["disorder"]), "custom")


def parse_config(raw: dict | None, kind: str, seed: int | None = None) -> ExperimentConfig:
    """Validate ``raw`` against the schema and fill defaults for ``kind``."""
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    for key in raw:
        if key not in TOP_KEYS:
            raise ConfigError(key, "unknown key")
    if kind not in KINDS:
        raise ConfigError("experiment", f"unknown experiment {kind!r}")
    if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}")
    if raw.get("experiment", kind) != kind:
        raise ConfigError("experiment", f"config is for {raw['experiment']!r}, not {kind!r}")

    if seed is None:
        seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ConfigError("seed", "expected an unsigned 64-bit integer")

    explicit = {k: raw[k] for k in MODEL_KEYS if k in raw}
    if explicit and "model" in raw:
        raise ConfigError("model", "give either a model name or explicit geometry keys, not both")
    if explicit:
        section: dict | None = explicit
    elif "model" in raw:
        spec = raw["model"]
        if isinstance(spec, str):
            section = _resolve_builtin(spec, {})
        elif isinstance(spec, dict) and "name" in spec:
            section = _resolve_builtin(spec["name"], {k: v for k, v in spec.items() if k != "name"})
        else:
            raise ConfigError("model", "expected a built-in name or {name, ...overrides}")
    else:
        default = DEFAULT_MODEL[kind]
        section = None if default is None else _resolve_builtin(default, {})

    params = copy.deepcopy(DEFAULT_PARAMS[kind])
    user = raw.get("params", {})
    if not isinstance(user, dict):
        raise ConfigError("params", "expected an object")
    for key, value in user.items():
        if key not in params:
            raise ConfigError(f"params.{key}", f"not a parameter of {kind}")
        params[key] = value
    _check_params(kind, params)

    cfg = ExperimentConfig(kind, int(seed), section, params)
    if section is not None:
        model = cfg.model()
        if not model.disorder.support_full_R:
            log.warning("disorder %s lacks full support on R; full-support results do not apply",
                        model.disorder.family)
    return cfg


def _check_params(kind: str, params: dict) -> None:
    for key, value in params.items():
        if isinstance(value, bool):
            continue
        if key in ("realizations", "instances", "herglotz_models", "herglotz_grid",
                   "columns_per_region", "size", "block_size", "herglotz_size"):
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"params.{key}", "expected a positive integer")
        if key in ("delta_rel", "tol", "min_imag", "window_constant", "tv_threshold",
                   "negligibility_max", "contrast_min_growth") and not (
                isinstance(value, (int, float)) and value > 0):
            raise ConfigError(f"params.{key}", "expected a positive number")
    if kind == "minami" and any(not (isinstance(x, (int, float)) and x > 0) for x in params["lengths"]):
        raise ConfigError("params.lengths", "interval lengths must be positive")
    if kind == "stats" and params["expect"] not in ("auto", "poisson", "compound"):
        raise ConfigError("params.expect", "one of auto, poisson, compound")


def load_config(path: str | Path | None, kind: str, seed: int | None = None) -> ExperimentConfig:
    if path is None:
        return parse_config(None, kind, seed)
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return parse_config(raw, kind, seed)
