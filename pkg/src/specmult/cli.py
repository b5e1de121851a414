"""``specmult`` command-line driver.

Exit codes: 0 success, 2 configuration/schema error, 3 numerical failure
(a ``diagnostics.json`` is written to the output directory).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from .config import KINDS, ConfigError, load_config
from .experiments import RUNNERS
from .green_matrix import InconclusiveBoundaryValue, SingularResolventError
from .poly_multiplicity import IllConditionedError
from .spectral_core import EigensolverError
from .statistics import EnsembleError

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (EigensolverError, SingularResolventError, InconclusiveBoundaryValue,
                  IllConditionedError, EnsembleError, ArithmeticError, np.linalg.LinAlgError)

log = logging.getLogger("specmult")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specmult", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--seed", type=_u64, help="master seed (env SPECMULT_SEED)")
        p.add_argument("--threads", type=_positive, help="worker threads (env SPECMULT_THREADS)")
        p.add_argument("--out", type=Path, default=None, help="artifact directory (default out/<kind>)")
    return parser


def _env_int(name: str) -> int | None:
    raw = os.environ.get(name)
    return None if raw in (None, "") else int(raw, 0)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    out = args.out or Path("out") / args.kind
    try:
        seed = args.seed if args.seed is not None else _env_int("SPECMULT_SEED")
        threads = args.threads or _env_int("SPECMULT_THREADS") or os.cpu_count() or 1
        cfg = load_config(args.config, args.kind, seed)
    except (ConfigError, ValueError) as exc:
        print(f"specmult: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        result = RUNNERS[args.kind](cfg, threads=threads, out=out)
    except NUMERIC_ERRORS as exc:
        out.mkdir(parents=True, exist_ok=True)
        diag = {"error": type(exc).__name__, "message": str(exc), "experiment": cfg.kind,
                "master_seed": cfg.master_seed, "config_sha256": cfg.digest(),
                "traceback": traceback.format_exc()}
        (out / "diagnostics.json").write_text(json.dumps(diag, indent=2) + "\n")
        print(f"specmult: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for name, ok in result.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    for path in result.files:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
