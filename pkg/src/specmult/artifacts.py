"""CSV/JSON artifact writers.

Every file opens with the provenance header
``# specmult schema_version=1 experiment=<kind> master_seed=<seed> config_sha256=<hash>``.
CSV uses '.' decimals, shortest round-trip float formatting and '\\n' endings.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .config import SCHEMA_VERSION, ExperimentConfig


def provenance(cfg: ExperimentConfig) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.kind,
        "master_seed": cfg.master_seed,
        "config_sha256": cfg.digest(),
    }


def header_line(cfg: ExperimentConfig) -> str:
    return "# specmult " + " ".join(f"{k}={v}" for k, v in provenance(cfg).items())


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, cfg: ExperimentConfig, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(header_line(cfg) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def write_json(path: Path, cfg: ExperimentConfig, payload: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"header": provenance(cfg), "config": cfg.resolved(), **payload}
    path.write_text(json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


def read_csv(path: Path) -> tuple[str, list[dict[str, str]]]:
    """Header comment line and the data rows of an artifact CSV."""
    with path.open() as fh:
        header = fh.readline().rstrip("\n")
        return header, list(csv.DictReader(fh))
