"""Command-line entry point: ``kernelritz {solve,galerkin,interpolate,converge,rates}``.

Runs are configured by a flat JSON object with dotted keys (see ``DEFAULTS``).
Command-line overrides take precedence over the file, which takes precedence
over the defaults.  The resolved configuration is written next to the outputs.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import METHODS, StudyConfig, convergence_study, default_h_max, estimate_rates, expected_rates, read_csv, records_to_csv, run_method
from .geometry import CircularSector
from .kernels import DegenerateCentersError, KernelFamily, KernelSpec, SingularEvaluationError
from .problems import PROBLEMS, make_problem
from .solver import FixedQuadrature, NumericalError, TrainConfig

logger = logging.getLogger("kernelritz")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DEFAULTS = {
    "problem": "smooth_poisson",
    "problem.c_pen": 100.0,
    "domain.kind": None,
    "domain.angle": None,
    "kernel.family": "matern32",
    "kernel.shape": 1.0,
    "centers.n_per_dim": 4,
    "mesh_norm.resolution": 400,
    "error.grid_points_per_dim": 101,
    "quadrature.interior_batch": None,
    "quadrature.boundary_batch": None,
    "quadrature.fixed_rule": "gauss",
    "quadrature.gauss_cells": 100,
    "quadrature.gauss_order": 4,
    "quadrature.fixed_interior": 200_000,
    "quadrature.fixed_boundary": 20_000,
    "seed": 0,
    "train.epochs": 5000,
    "train.lr": 1e-2,
    "train.milestones": None,
    "train.basis": "lagrange",
    "train.full_batch": False,
    "train.seed": None,
    "n_list": [2, 4, 8, 16],
    "methods": ["interpolation", "galerkin", "deep_ritz"],
    "rates.h_max": None,
}

_DOMAIN_OF = {"smooth_poisson": "unit_square", "singular_sector": "sector"}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a flat JSON object of dotted keys")
    return data


def merge(file_values: dict, overrides: dict) -> dict:
    unknown = sorted(set(file_values) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    cfg = dict(DEFAULTS)
    cfg.update(file_values)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def _number(cfg, key, kind=float, minimum=None, optional=False):
    value = cfg[key]
    if value is None and optional:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if kind is int and float(value) != int(value):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    value = kind(value)
    if not math.isfinite(value) or (minimum is not None and value < minimum):
        raise ConfigError(f"{key} must be >= {minimum}, got {value!r}")
    return value


def _int_list(cfg, key):
    value = cfg[key]
    if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, int) for v in value):
        raise ConfigError(f"{key} must be a list of integers, got {value!r}")
    return value


def resolve(cfg: dict) -> dict:
    """Validate and fill derived defaults; returns the effective configuration."""
    cfg = dict(cfg)
    if cfg["problem"] not in PROBLEMS:
        raise ConfigError(f"problem must be one of {sorted(PROBLEMS)}, got {cfg['problem']!r}")
    kind = _DOMAIN_OF[cfg["problem"]]
    if cfg["domain.kind"] not in (None, kind):
        raise ConfigError(f"domain.kind {cfg['domain.kind']!r} does not match problem {cfg['problem']!r} (expects {kind!r})")
    cfg["domain.kind"] = kind
    if kind == "sector":
        if cfg["domain.angle"] is None:
            cfg["domain.angle"] = CircularSector().angle
        angle = _number(cfg, "domain.angle", minimum=0.0)
        if not 0.0 < angle < 2.0 * math.pi:
            raise ConfigError(f"domain.angle must lie in (0, 2*pi), got {angle!r}")
    elif cfg["domain.angle"] is not None:
        raise ConfigError("domain.angle applies only to the sector domain")
    if _number(cfg, "problem.c_pen") <= 0.0:
        raise ConfigError("problem.c_pen must be positive")

    families = [f.value for f in KernelFamily]
    if cfg["kernel.family"] not in families:
        raise ConfigError(f"kernel.family must be one of {families}, got {cfg['kernel.family']!r}")
    if _number(cfg, "kernel.shape") <= 0.0:
        raise ConfigError("kernel.shape must be positive")

    _number(cfg, "centers.n_per_dim", int, 1)
    _number(cfg, "mesh_norm.resolution", int, 2)
    _number(cfg, "error.grid_points_per_dim", int, 2)
    _number(cfg, "quadrature.interior_batch", int, 1, optional=True)
    _number(cfg, "quadrature.boundary_batch", int, 1, optional=True)
    if (cfg["quadrature.interior_batch"] is None) != (cfg["quadrature.boundary_batch"] is None):
        raise ConfigError("quadrature.interior_batch and quadrature.boundary_batch must be set together")
    if cfg["quadrature.fixed_rule"] not in ("gauss", "monte_carlo"):
        raise ConfigError(f"quadrature.fixed_rule must be 'gauss' or 'monte_carlo', got {cfg['quadrature.fixed_rule']!r}")
    for key in ("quadrature.gauss_cells", "quadrature.gauss_order", "quadrature.fixed_interior", "quadrature.fixed_boundary"):
        _number(cfg, key, int, 1)

    _number(cfg, "seed", int, 0)
    _number(cfg, "train.seed", int, 0, optional=True)
    _number(cfg, "train.epochs", int, 0)
    if _number(cfg, "train.lr") <= 0.0:
        raise ConfigError("train.lr must be positive")
    if cfg["train.milestones"] is not None:
        if len(_int_list(cfg, "train.milestones")) > TrainConfig.max_reductions:
            raise ConfigError(f"train.milestones allows at most {TrainConfig.max_reductions} reductions")
    if cfg["train.basis"] not in ("direct", "lagrange"):
        raise ConfigError(f"train.basis must be 'direct' or 'lagrange', got {cfg['train.basis']!r}")
    if not isinstance(cfg["train.full_batch"], bool):
        raise ConfigError("train.full_batch must be true or false")

    n_list = _int_list(cfg, "n_list")
    if not n_list:
        raise ConfigError("n_list must not be empty")
    if n_list != sorted(set(n_list)) or n_list[0] < 1:
        raise ConfigError(f"n_list must be strictly ascending positive integers, got {n_list}")
    methods = cfg["methods"]
    if not isinstance(methods, list) or not methods or any(m not in METHODS for m in methods):
        raise ConfigError(f"methods must be a non-empty list drawn from {list(METHODS)}, got {methods!r}")
    if cfg["rates.h_max"] is not None and _number(cfg, "rates.h_max") <= 0.0:
        raise ConfigError("rates.h_max must be positive")
    return cfg


def build_problem(cfg):
    return make_problem(cfg["problem"], c_pen=float(cfg["problem.c_pen"]), angle=cfg["domain.angle"])


def build_kernel(cfg):
    return KernelSpec(cfg["kernel.family"], float(cfg["kernel.shape"]))


def build_study(cfg, method: str | None = None) -> StudyConfig:
    fixed = FixedQuadrature(
        rule=cfg["quadrature.fixed_rule"],
        cells=int(cfg["quadrature.gauss_cells"]),
        order=int(cfg["quadrature.gauss_order"]),
        sizes=(int(cfg["quadrature.fixed_interior"]), int(cfg["quadrature.fixed_boundary"])),
    )
    batch = None
    if cfg["quadrature.interior_batch"] is not None:
        batch = (int(cfg["quadrature.interior_batch"]), int(cfg["quadrature.boundary_batch"]))
    train = TrainConfig(
        epochs=int(cfg["train.epochs"]),
        lr=float(cfg["train.lr"]),
        milestones=cfg["train.milestones"],
        basis=cfg["train.basis"],
        batch_sizes=batch,
        full_batch=cfg["train.full_batch"],
        fixed=fixed,
    )
    seed = int(cfg["seed"])
    if method == "deep_ritz" and cfg["train.seed"] is not None:
        seed = int(cfg["train.seed"])
    return StudyConfig(
        seed=seed,
        mesh_resolution=int(cfg["mesh_norm.resolution"]),
        error_grid=int(cfg["error.grid_points_per_dim"]),
        fixed=fixed,
        train=train,
    )


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    logger.info("wrote %s", path)


def _table(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def coefficients_csv(expansion) -> str:
    rows = ([repr(float(x)), repr(float(y)), repr(float(b))] for (x, y), b in zip(expansion.centers, expansion.beta))
    return _table(["x", "y", "beta"], rows)


def history_csv(history) -> str:
    rows = ([str(e), repr(en), repr(g), repr(lr)] for e, en, g, lr in history.rows())
    return _table(["epoch", "energy", "grad_norm", "lr"], rows)


def rates_rows(records, problem=None, h_max=None):
    rates = estimate_rates(records, h_max)
    rows = []
    for (method, kernel, shape), fit in sorted(rates.items()):
        row = {"method": method, "kernel": kernel, "shape": shape, "l2_rate": fit["l2_rate"], "h1_rate": fit["h1_rate"], "points": fit["points"]}
        if problem is not None:
            h1_exp, l2_exp = expected_rates(KernelSpec(kernel, shape), problem.regularity)
            row.update(expected_l2=l2_exp, expected_h1=h1_exp)
        rows.append(row)
    return rows


def _rates_text(rows) -> tuple[str, str]:
    header = ["method", "kernel", "shape", "l2_rate", "h1_rate", "points"]
    if rows and "expected_l2" in rows[0]:
        header += ["expected_l2", "expected_h1"]
    table = _table(header, ([repr(r[k]) if isinstance(r[k], float) else str(r[k]) for k in header] for r in rows))
    lines = []
    for r in rows:
        line = f"{r['method']} {r['kernel']} shape={r['shape']:g}: l2_rate={r['l2_rate']:.4f} h1_rate={r['h1_rate']:.4f} ({r['points']} points)"
        if "expected_l2" in r:
            line += f" expected l2={r['expected_l2']:.4g} h1={r['expected_h1']:.4g}"
        lines.append(line)
    return table, "\n".join(lines)


def _single(args, cfg, method):
    problem, kernel = build_problem(cfg), build_kernel(cfg)
    n = int(cfg["centers.n_per_dim"])
    record, expansion, extras = run_method(problem, kernel, n, method, build_study(cfg, method))
    out = Path(args.out_dir)
    prefix = args.command
    _write(out / f"{prefix}_records.csv", records_to_csv([record]))
    _write(out / f"{prefix}_coefficients.csv", coefficients_csv(expansion))
    if "history" in extras:
        _write(out / f"{prefix}_train_log.csv", history_csv(extras["history"]))
    sys.stdout.write(records_to_csv([record]))
    return EXIT_OK


def cmd_solve(args, cfg):
    return _single(args, cfg, "deep_ritz")


def cmd_galerkin(args, cfg):
    return _single(args, cfg, "galerkin")


def cmd_interpolate(args, cfg):
    return _single(args, cfg, "interpolation")


def cmd_converge(args, cfg):
    problem, kernel = build_problem(cfg), build_kernel(cfg)
    records = []
    for method in cfg["methods"]:
        records += convergence_study(problem, kernel, cfg["n_list"], method, build_study(cfg, method))
    h_max = cfg["rates.h_max"] if cfg["rates.h_max"] is not None else default_h_max(problem)
    out = Path(args.out_dir)
    _write(out / "converge_records.csv", records_to_csv(records))
    table, summary = _rates_text(rates_rows(records, problem, h_max))
    _write(out / "rates.csv", table)
    print(summary)
    return EXIT_OK


def cmd_rates(args, cfg):
    path = Path(args.csv)
    if not path.is_file():
        raise ConfigError(f"records file not found: {path}")
    try:
        records = read_csv(path)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    h_max = args.h_max if args.h_max is not None else cfg["rates.h_max"]
    rows = rates_rows(records, None, h_max)
    if not rows:
        raise ConfigError(f"{path}: need at least two records per (method, kernel, shape) group")
    print(_rates_text(rows)[1])
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "galerkin": cmd_galerkin,
    "interpolate": cmd_interpolate,
    "converge": cmd_converge,
    "rates": cmd_rates,
}


def _csv_ints(text):
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _csv_words(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="flat JSON file with dotted keys")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory (default: out)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--problem", choices=sorted(PROBLEMS))
    run.add_argument("--kernel", choices=[f.value for f in KernelFamily])
    run.add_argument("--shape", type=float)
    run.add_argument("--c-pen", type=float)
    run.add_argument("--angle", type=float, help="sector opening angle in radians")
    run.add_argument("--n", type=int, help="centers per dimension")
    run.add_argument("--epochs", type=int)
    run.add_argument("--lr", type=float)
    run.add_argument("--basis", choices=["direct", "lagrange"])
    run.add_argument("--full-batch", action="store_const", const=True, default=None)
    run.add_argument("--n-list", type=_csv_ints, help="comma-separated centers per dimension")
    run.add_argument("--methods", type=_csv_words, help=f"comma-separated subset of {','.join(METHODS)}")

    parser = argparse.ArgumentParser(prog="kernelritz", description="Kernel-expansion energy solver for elliptic problems.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common, run], help="train one kernel expansion with Adam")
    sub.add_parser("galerkin", parents=[common, run], help="assemble and solve the linear system")
    sub.add_parser("interpolate", parents=[common, run], help="interpolate the exact solution")
    sub.add_parser("converge", parents=[common, run], help="sweep n_list for the requested methods")
    rates = sub.add_parser("rates", parents=[common], help="fit convergence rates from a records CSV")
    rates.add_argument("csv")
    rates.add_argument("--h-max", type=float, help="drop records with a larger mesh norm")
    return parser


_OVERRIDES = {
    "seed": "seed",
    "problem": "problem",
    "kernel": "kernel.family",
    "shape": "kernel.shape",
    "c_pen": "problem.c_pen",
    "angle": "domain.angle",
    "n": "centers.n_per_dim",
    "epochs": "train.epochs",
    "lr": "train.lr",
    "basis": "train.basis",
    "full_batch": "train.full_batch",
    "n_list": "n_list",
    "methods": "methods",
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.out_dir = getattr(args, "out_dir", "out")
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    overrides = {key: getattr(args, attr) for attr, key in _OVERRIDES.items() if hasattr(args, attr)}
    try:
        file_values = load_config(args.config) if getattr(args, "config", None) else {}
        cfg = resolve(merge(file_values, overrides))
        if args.command != "rates":
            _write(Path(args.out_dir) / f"{args.command}_config.json", json.dumps(cfg, indent=2, sort_keys=True) + "\n")
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, SingularEvaluationError, DegenerateCentersError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
