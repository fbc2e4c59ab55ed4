"""End-to-end acceptance checks, one test per criterion.

Each test prints its measurements and registers a single PASS/FAIL line that
is repeated in the pytest terminal summary under "acceptance criteria".
"""

import itertools
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from kernelritz.analysis import convergence_study, default_h_max, estimate_rates
from kernelritz.assembly import energy_gradient, energy_value
from kernelritz.densela import condition_number, solve_spd
from kernelritz.geometry import place_centers, sample_boundary
from kernelritz.kernels import KernelSpec, kernel_grad_x, kernel_eval
from kernelritz.problems import singular_sector, smooth_poisson
from kernelritz.solver import FixedQuadrature, TrainConfig, fixed_form, solve_galerkin, train

MATERN = ["matern12", "matern32", "matern52"]


def test_criterion_1_smooth_superconvergence(criterion):
    with criterion(1, "smooth-case L2 rate 2.0 +- 0.4 (Matern12, interpolation and Galerkin)") as c:
        t0 = time.perf_counter()
        problem = smooth_poisson()
        kernel = KernelSpec("matern12")
        rates = {}
        for method in ("interpolation", "galerkin"):
            recs = convergence_study(problem, kernel, [2, 4, 8, 16], method)
            rates[method] = estimate_rates(recs)[(method, "matern12", 1.0)]["l2_rate"]
            c.note(f"{method} l2_rate={rates[method]:.3f} rel_l2={[f'{r.rel_l2:.2e}' for r in recs]}")
        elapsed = time.perf_counter() - t0
        c.note(f"{elapsed:.0f}s")
        for method, rate in rates.items():
            assert abs(rate - 2.0) <= 0.4, f"{method} rate {rate}"
        assert elapsed < 120


def test_criterion_2_singular_rates(criterion):
    with criterion(2, "sector L2 rate 1.24 +- 0.25, H1 = L2 - 1 +- 0.3, spread < 0.4") as c:
        t0 = time.perf_counter()
        problem = singular_sector()
        fits = {}
        for family in MATERN:
            recs = convergence_study(problem, KernelSpec(family), [4, 8, 12, 16, 20], "interpolation")
            fit = estimate_rates(recs, default_h_max(problem))[("interpolation", family, 1.0)]
            fits[family] = fit
            c.note(f"{family} l2={fit['l2_rate']:.3f} h1={fit['h1_rate']:.3f} ({fit['points']} pts)")
        elapsed = time.perf_counter() - t0
        for fit in fits.values():
            assert abs(fit["l2_rate"] - 1.24) <= 0.25
            assert abs(fit["h1_rate"] - (fit["l2_rate"] - 1.0)) <= 0.3
        for a, b in itertools.combinations(fits.values(), 2):
            assert abs(a["l2_rate"] - b["l2_rate"]) < 0.4
        assert elapsed < 300


def test_criterion_3_conditioning_growth(criterion):
    with criterion(3, "Galerkin condition numbers grow with n and with smoothness") as c:
        problem = smooth_poisson()
        ns = [1, 2, 4, 6, 8, 10, 12]
        conds = {}
        for family in MATERN:
            conds[family] = [solve_galerkin(problem, KernelSpec(family), place_centers(problem.domain, n))[1] for n in ns]
            c.note(f"{family} " + " ".join(f"{v:.2e}" for v in conds[family]))
        for family in MATERN:
            assert all(a < b for a, b in zip(conds[family], conds[family][1:])), family
        assert conds["matern52"][-1] > conds["matern32"][-1] > conds["matern12"][-1]
        assert conds["matern52"][-1] / conds["matern52"][0] > 1e6


def test_criterion_4_energy_gap_identity(criterion):
    with criterion(4, "energy-gap identity on 20 random fixed-quadrature forms to 1e-9") as c:
        rng = np.random.default_rng(404)
        worst = 0.0
        for k in range(20):
            problem = smooth_poisson() if k % 2 == 0 else singular_sector()
            kernel = KernelSpec(MATERN[k % 3], float(rng.uniform(0.5, 2.0)))
            centers = place_centers(problem.domain, int(rng.integers(1, 4)))
            form = fixed_form(problem, kernel, centers, FixedQuadrature(rule="monte_carlo", sizes=(20_000, 4_000)), seed=k)
            beta_star, fallback = solve_spd(form.A, form.ell)
            assert not fallback
            d = rng.standard_normal(form.size)
            lhs = d @ form.A @ d
            rhs = 2.0 * (energy_value(form, beta_star + d) - energy_value(form, beta_star))
            worst = max(worst, abs(lhs - rhs) / abs(lhs))
        c.note(f"max relative deviation {worst:.2e}")
        assert worst < 1e-9


def test_criterion_5_gradient_correctness(criterion):
    with criterion(5, "energy gradient vs FD < 1e-7; kernel gradients vs FD < 1e-5") as c:
        rng = np.random.default_rng(505)
        problem = smooth_poisson()
        worst_form = 0.0
        for _ in range(10):
            n = int(rng.integers(6, 21))
            centers = rng.uniform(0.0, 1.0, (n, 2))
            form = fixed_form(problem, KernelSpec(str(rng.choice(MATERN[1:]))), centers, FixedQuadrature(rule="monte_carlo", sizes=(5_000, 1_000)), seed=1)
            beta = rng.standard_normal(n)
            h = 1e-4
            fd = np.array([(energy_value(form, beta + h * e) - energy_value(form, beta - h * e)) / (2 * h) for e in np.eye(n)])
            g = energy_gradient(form, beta)
            worst_form = max(worst_form, np.linalg.norm(g - fd) / np.linalg.norm(g))
        worst_kernel = 0.0
        for family in ("matern32", "matern52", "wendland_c2"):
            spec = KernelSpec(family)
            for _ in range(100):
                x, y = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
                h = 1e-5
                fd = np.array([(kernel_eval(spec, x + h * e, y) - kernel_eval(spec, x - h * e, y)) / (2 * h) for e in np.eye(2)])
                g = kernel_grad_x(spec, x, y)
                worst_kernel = max(worst_kernel, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-3))
        c.note(f"form {worst_form:.1e}, kernel {worst_kernel:.1e}")
        assert worst_form < 1e-7
        assert worst_kernel < 1e-5


def test_criterion_6_optimizer_soundness(criterion):
    with criterion(6, "full-batch energy within 1e-4 of Galerkin minimum; Lagrange and direct bases agree within 1e-4") as c:
        problem = smooth_poisson()
        failures = []
        for family, n in itertools.product(MATERN, [1, 2, 4]):
            kernel = KernelSpec(family)
            centers = place_centers(problem.domain, n)
            form = fixed_form(problem, kernel, centers)
            i_star = energy_value(form, solve_spd(form.A, form.ell)[0])
            lagrange, _ = train(problem, kernel, centers, TrainConfig(full_batch=True, basis="lagrange"), form=form)
            # the direct basis gets the long 100 000-epoch budget
            direct, _ = train(problem, kernel, centers, TrainConfig(epochs=100_000, full_batch=True, basis="direct"), form=form)
            i_lag = energy_value(form, lagrange.beta)
            i_dir = energy_value(form, direct.beta)
            c.note(f"{family} n={n}: lagrange gap {i_lag - i_star:.1e}, direct gap {i_dir - i_star:.1e}, |lagrange-direct| {abs(i_lag - i_dir):.1e}")
            if not i_lag - i_star < 1e-4:
                failures.append(f"{family} n={n} lagrange vs Galerkin")
            if not abs(i_lag - i_dir) < 1e-4:
                failures.append(f"{family} n={n} lagrange vs direct")
        if failures:
            c.note("failing cases: " + ", ".join(failures))
        assert not failures


def fd_laplacian(u, pts, h=1e-3):
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    return (u(pts + ex) + u(pts - ex) + u(pts + ey) + u(pts - ey) - 4 * u(pts)) / h**2


def test_criterion_7_exact_solutions(criterion):
    with criterion(7, "FD Laplacian residuals and Dirichlet traces of the exact solutions") as c:
        rng = np.random.default_rng(707)
        smooth, sector = smooth_poisson(), singular_sector()
        pts = rng.uniform(0.01, 0.99, (200, 2))
        res_smooth = np.max(np.abs(fd_laplacian(smooth.exact, pts) + 4.0))
        r = rng.uniform(0.2, 1.49, 200)
        t = rng.uniform(0.01, 1.5 * math.pi - 0.01, 200)
        polar = np.column_stack([r * np.cos(t), r * np.sin(t)])
        res_sector = np.max(np.abs(fd_laplacian(sector.exact, polar)))
        trace = 0.0
        for p in (smooth, sector):
            b = sample_boundary(p.domain, 200, rng)
            trace = max(trace, np.max(np.abs(p.exact(b.points) - p.g_dirichlet(b.points))))
        c.note(f"smooth {res_smooth:.1e}, sector {res_sector:.1e}, trace {trace:.1e}")
        assert res_smooth < 1e-6
        assert res_sector < 1e-4
        assert trace < 1e-12


def test_criterion_8_determinism(criterion, tmp_path):
    with criterion(8, "identical config and seed give byte-identical CSV outputs") as c:
        outputs = []
        for k in range(2):
            out = tmp_path / f"run{k}"
            cmd = [sys.executable, "-m", "kernelritz.cli", "--seed", "3", "converge", "--problem", "singular_sector", "--n-list", "1,2", "--epochs", "300", "--out-dir", str(out)]
            proc = subprocess.run(cmd, capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        c.note(f"compared {', '.join(outputs[0])}")
        assert outputs[0] == outputs[1]
        assert b"deep_ritz" in outputs[0]["converge_records.csv"]
