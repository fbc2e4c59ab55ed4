"""Error norms, convergence studies, rate estimates and CSV records."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Optional

import numpy as np

from .assembly import BatchEnergy, QuadratureSet
from .densela import loglog_rate
from .geometry import BoundarySamples, CircularSector, bbox_grid, mesh_norm, place_centers
from .interpolation import Expansion, interpolate
from .kernels import KernelSpec
from .problems import ProblemSpec
from .solver import FixedQuadrature, TrainConfig, fixed_quadrature, solve_galerkin, train

logger = logging.getLogger(__name__)

CSV_HEADER = ["method", "kernel", "shape", "n_per_dim", "n_centers", "mesh_norm", "rel_l2", "rel_h1", "final_energy", "cond", "seed"]
METHODS = ("deep_ritz", "galerkin", "interpolation")

# preasymptotic mesh norms excluded from rate fits on the sector
SECTOR_H_MAX = 0.3


class MissingExactSolution(ValueError):
    pass


@dataclass
class ConvergenceRecord:
    method: str
    kernel: str
    shape: float
    n_per_dim: int
    n_centers: int
    mesh_norm: float
    rel_l2: float
    rel_h1: float
    final_energy: Optional[float] = None
    cond: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.rel_l2 < 0 or self.rel_h1 < 0:
            raise ValueError("relative errors must be non-negative")
        if not self.mesh_norm > 0:
            raise ValueError("mesh norm must be positive")

    def csv_row(self) -> list[str]:
        return [_fmt(v) for v in asdict(self).values()]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class FunctionPair:
    """Adapter so a plain (value, gradient) pair can be measured like an expansion."""

    value: Callable
    gradient: Callable

    def __call__(self, points):
        return self.value(points)

    def grad(self, points, at_center="raise"):
        return self.gradient(points)


def error_grid(domain, per_dim: int = 101) -> np.ndarray:
    grid = bbox_grid(domain, per_dim)
    if isinstance(domain, CircularSector):
        grid = grid[np.hypot(grid[:, 0], grid[:, 1]) >= 1e-9]
    return grid


def error_norms(problem: ProblemSpec, approx, grid_points_per_dim: int = 101) -> tuple[float, float]:
    """Relative L2 and H1 errors on a uniform grid with equal weights."""
    if not problem.has_exact:
        raise MissingExactSolution(f"problem {problem.name!r} has no exact solution")
    pts = error_grid(problem.domain, grid_points_per_dim)
    u = problem.exact(pts)
    du = problem.exact_grad(pts)
    e = u - approx(pts)
    de = du - approx.grad(pts, at_center="zero")
    l2_err = np.sum(e * e)
    l2_ref = np.sum(u * u)
    h1_err = l2_err + np.sum(de * de)
    h1_ref = l2_ref + np.sum(du * du)
    return float(math.sqrt(l2_err / l2_ref)), float(math.sqrt(h1_err / h1_ref))


def expected_rates(kernel: KernelSpec, regularity: float, dim: int = 2) -> tuple[float, float]:
    """Predicted (H1, L2) rates in the mesh norm for a solution in ``H^regularity``."""
    if not regularity > 1.0:
        raise ValueError("regularity must exceed 1")
    t = min(kernel.tau(dim), regularity)
    return t - 1.0, t


def quadrature_energy(problem, kernel, centers, quad: QuadratureSet, beta, chunk: int = 4096) -> float:
    """Energy of ``psi[beta]`` on a quadrature set without forming ``A``."""
    total = 0.0
    nq, nb = quad.sizes
    empty_b = BoundarySamples(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0))
    for start in range(0, nq, chunk):
        sl = slice(start, start + chunk)
        piece = QuadratureSet(quad.interior_points[sl], quad.interior_weights[sl], empty_b)
        total += BatchEnergy(problem, kernel, centers, piece).value(beta)
    b = quad.boundary
    for start in range(0, nb, chunk):
        sl = slice(start, start + chunk)
        piece = QuadratureSet(np.zeros((0, 2)), np.zeros(0), BoundarySamples(b.points[sl], b.normals[sl], b.weights[sl]))
        total += BatchEnergy(problem, kernel, centers, piece).value(beta)
    return float(total)


@dataclass
class StudyConfig:
    seed: int = 0
    mesh_resolution: int = 400
    error_grid: int = 101
    fixed: FixedQuadrature = field(default_factory=FixedQuadrature)
    train: TrainConfig = field(default_factory=TrainConfig)


def derived_seed(master: int, n_per_dim: int) -> int:
    return int(np.random.SeedSequence([int(master), int(n_per_dim)]).generate_state(1)[0])


def run_method(problem, kernel, n_per_dim: int, method: str, config: StudyConfig):
    """One solve at one resolution.  Returns ``(ConvergenceRecord, Expansion, extras)``."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    centers = place_centers(problem.domain, n_per_dim)
    seed = derived_seed(config.seed, n_per_dim)
    extras = {}
    energy = cond = None
    if method == "interpolation":
        expansion = interpolate(kernel, centers, problem.exact(centers))
    elif method == "galerkin":
        expansion, cond, _ = solve_galerkin(problem, kernel, centers, config.fixed, seed)
        energy = expansion.info["energy"]
    else:
        tc = replace(config.train, seed=seed, fixed=config.fixed)
        expansion, history = train(problem, kernel, centers, tc)
        energy = quadrature_energy(problem, kernel, centers, fixed_quadrature(problem, config.fixed, seed), expansion.beta)
        extras["history"] = history
    rel_l2, rel_h1 = error_norms(problem, expansion, config.error_grid)
    record = ConvergenceRecord(
        method=method,
        kernel=kernel.label,
        shape=kernel.shape,
        n_per_dim=int(n_per_dim),
        n_centers=len(centers),
        mesh_norm=mesh_norm(problem.domain, centers, config.mesh_resolution),
        rel_l2=rel_l2,
        rel_h1=rel_h1,
        final_energy=energy,
        cond=cond,
        seed=int(config.seed),
    )
    return record, expansion, extras


def convergence_study(problem, kernel, n_list: Iterable[int], method: str, config: StudyConfig | None = None, csv_path=None):
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise ValueError("n_list must not be empty")
    if n_list != sorted(set(n_list)):
        raise ValueError("n_list must be strictly ascending")
    config = config or StudyConfig()
    records = []
    for n in n_list:
        record, _, _ = run_method(problem, kernel, n, method, config)
        logger.info("%s %s n=%d h=%.4g rel_l2=%.3e rel_h1=%.3e", method, kernel.label, n, record.mesh_norm, record.rel_l2, record.rel_h1)
        records.append(record)
    if csv_path is not None:
        write_csv(records, csv_path)
    return records


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def write_csv(records, path):
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))


def _parse_optional(text, kind):
    return None if text == "" else kind(text)


def read_csv(path) -> list[ConvergenceRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        out = []
        for row in reader:
            out.append(
                ConvergenceRecord(
                    method=row["method"],
                    kernel=row["kernel"],
                    shape=float(row["shape"]),
                    n_per_dim=int(row["n_per_dim"]),
                    n_centers=int(row["n_centers"]),
                    mesh_norm=float(row["mesh_norm"]),
                    rel_l2=float(row["rel_l2"]),
                    rel_h1=float(row["rel_h1"]),
                    final_energy=_parse_optional(row["final_energy"], float),
                    cond=_parse_optional(row["cond"], float),
                    seed=int(row["seed"]),
                )
            )
    return out


def estimate_rates(records, h_max: float | None = None) -> dict:
    """Fit L2 and H1 rates per (method, kernel, shape) group.

    Points with ``mesh_norm > h_max`` are treated as preasymptotic and
    dropped when at least two points remain.
    """
    groups: dict = {}
    for r in records:
        groups.setdefault((r.method, r.kernel, r.shape), []).append(r)
    out = {}
    for key, rows in groups.items():
        rows = sorted(rows, key=lambda r: r.n_per_dim)
        if h_max is not None:
            kept = [r for r in rows if r.mesh_norm <= h_max]
            rows = kept if len(kept) >= 2 else rows
        if len(rows) < 2:
            continue
        hs = [r.mesh_norm for r in rows]
        l2, _ = loglog_rate(hs, [r.rel_l2 for r in rows])
        h1, _ = loglog_rate(hs, [r.rel_h1 for r in rows])
        out[key] = {"l2_rate": l2, "h1_rate": h1, "points": len(rows)}
    return out


def default_h_max(problem: ProblemSpec) -> float | None:
    return SECTOR_H_MAX if isinstance(problem.domain, CircularSector) else None
