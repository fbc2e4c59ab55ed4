"""Energy minimisation over the kernel ansatz space, and the direct Galerkin solve."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import (
    QuadratureSet,
    QuadraticForm,
    assemble,
    default_batch_sizes,
    energy_value,
    mc_energy,
    sample_quadrature,
    to_lagrange,
)
from .densela import condition_number, factorize_spd, solve_spd
from .geometry import gauss_boundary
from .interpolation import Expansion
from .kernels import KernelSpec, check_distinct, kernel_matrix
from .problems import ProblemSpec

logger = logging.getLogger(__name__)

FIXED_QUADRATURE = (200_000, 20_000)

# independent generator streams derived from one seed
_FIXED_STREAM = 1
_BATCH_STREAM = 2


class NumericalError(RuntimeError):
    """Optimisation or solve produced unusable numbers."""


@dataclass(frozen=True)
class FixedQuadrature:
    """Quadrature reused across epochs or for the Galerkin matrix.

    ``rule="gauss"`` is a composite tensor Gauss-Legendre rule with ``cells``
    panels across the bounding box; ``rule="monte_carlo"`` draws ``sizes``
    (interior, boundary) uniform points from the seed.
    """

    rule: str = "gauss"
    cells: int = 100
    order: int = 4
    sizes: tuple[int, int] = FIXED_QUADRATURE

    def __post_init__(self):
        if self.rule not in ("gauss", "monte_carlo"):
            raise ValueError(f"unknown fixed quadrature rule {self.rule!r}")
        if self.cells < 1 or self.order < 1 or min(self.sizes) < 1:
            raise ValueError("fixed quadrature sizes must be positive")
        object.__setattr__(self, "sizes", tuple(int(v) for v in self.sizes))


@dataclass
class TrainConfig:
    epochs: int = 5000
    lr: float = 1e-2
    lr_factor: float = 0.5
    max_reductions: int = 15
    milestones: Optional[list[int]] = None
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    basis: str = "lagrange"
    batch_sizes: Optional[tuple[int, int]] = None
    full_batch: bool = False
    fixed: FixedQuadrature = field(default_factory=FixedQuadrature)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0.0 < self.lr_factor < 1.0:
            raise ValueError("lr_factor must lie in (0, 1)")
        if self.basis not in ("direct", "lagrange"):
            raise ValueError(f"basis must be 'direct' or 'lagrange', got {self.basis!r}")
        if self.milestones is not None:
            self.milestones = sorted(int(m) for m in self.milestones)
            if len(self.milestones) > self.max_reductions:
                raise ValueError("more milestones than allowed learning-rate reductions")

    def resolved_milestones(self) -> list[int]:
        if self.milestones is not None:
            return list(self.milestones)
        k = self.max_reductions
        marks = {int(round(self.epochs * j / (k + 1))) for j in range(1, k + 1)}
        return sorted(m for m in marks if 0 < m < self.epochs)


@dataclass
class TrainHistory:
    epoch: list[int] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)

    def append(self, epoch, energy, grad_norm, lr):
        self.epoch.append(epoch)
        self.energy.append(energy)
        self.grad_norm.append(grad_norm)
        self.lr.append(lr)

    def __len__(self):
        return len(self.epoch)

    def rows(self):
        return zip(self.epoch, self.energy, self.grad_norm, self.lr)


class AdamState:
    def __init__(self, params, betas=(0.9, 0.999), eps=1e-8):
        self.params = np.array(params, dtype=float)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = np.zeros_like(self.params)
        self.v = np.zeros_like(self.params)
        self.t = 0


def adam_step(state: AdamState, grad, lr: float) -> np.ndarray:
    """One bias-corrected Adam update of ``state.params`` (in place)."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.params.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match parameters {state.params.shape}")
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad))
        raise NumericalError(f"non-finite gradient entries at indices {bad[:10].tolist()} (step {state.t + 1})")
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grad * grad
    mhat = state.m / (1.0 - state.beta1**state.t)
    vhat = state.v / (1.0 - state.beta2**state.t)
    state.params -= lr * mhat / (np.sqrt(vhat) + state.eps)
    return state.params


def fixed_quadrature(problem: ProblemSpec, fixed: FixedQuadrature = FixedQuadrature(), seed: int = 0) -> QuadratureSet:
    if fixed.rule == "gauss":
        pts, w = problem.domain.gauss_interior(fixed.cells, fixed.order)
        return QuadratureSet(pts, w, gauss_boundary(problem.domain, fixed.cells, fixed.order))
    rng = np.random.default_rng([seed, _FIXED_STREAM])
    return sample_quadrature(problem.domain, fixed.sizes[0], fixed.sizes[1], rng)


def fixed_form(problem: ProblemSpec, kernel: KernelSpec, centers, fixed: FixedQuadrature = FixedQuadrature(), seed: int = 0) -> QuadraticForm:
    return assemble(problem, kernel, centers, fixed_quadrature(problem, fixed, seed))


def train(problem: ProblemSpec, kernel: KernelSpec, centers, config: TrainConfig, form: QuadraticForm | None = None):
    """Minimise the discrete energy with Adam.  Returns ``(Expansion, TrainHistory)``.

    By default a new Monte Carlo quadrature set is drawn every epoch.  With
    ``config.full_batch`` the fixed quadrature form (or ``form``, if given) is
    reused every epoch.
    """
    centers = check_distinct(centers)
    n = len(centers)
    history = TrainHistory()
    if config.epochs == 0:
        return Expansion(kernel, centers, np.zeros(n), info={"epochs": 0}), history

    kfac = None
    if config.basis == "lagrange":
        kfac = factorize_spd(kernel_matrix(kernel, centers))
        if kfac.fallback:
            raise NumericalError("kernel matrix is not numerically positive definite; Lagrange basis unavailable")

    if config.full_batch:
        if form is None:
            form = fixed_form(problem, kernel, centers, config.fixed, config.seed)
        work = to_lagrange(form, kfac) if kfac is not None else form

        def step_data(_rng, x):
            g = work.A @ x - work.ell
            return 0.5 * x @ (g - work.ell), g

    else:
        sizes = config.batch_sizes or default_batch_sizes(n)

        def step_data(rng, x):
            batch = mc_energy(problem, kernel, centers, sizes, rng)
            beta = kfac.solve(x) if kfac is not None else x
            g = batch.gradient(beta)
            energy = 0.5 * beta @ (g - batch.ell)
            if kfac is not None:
                g = kfac.solve(g)
            return energy, g

    rng = np.random.default_rng([config.seed, _BATCH_STREAM])
    state = AdamState(np.zeros(n), config.betas, config.eps)
    milestones = set(config.resolved_milestones())
    lr = config.lr
    for epoch in range(config.epochs):
        if epoch in milestones:
            lr *= config.lr_factor
        with np.errstate(over="ignore", invalid="ignore"):
            energy, g = step_data(rng, state.params)
        history.append(epoch, float(energy), float(np.linalg.norm(g)), lr)
        with np.errstate(over="ignore", invalid="ignore"):
            adam_step(state, g, lr)
        if not np.all(np.isfinite(state.params)):
            raise NumericalError(f"optimizer diverged at epoch {epoch} (learning rate {lr:g})")

    beta = kfac.solve(state.params) if kfac is not None else state.params.copy()
    if not np.all(np.isfinite(beta)):
        raise NumericalError("training produced non-finite coefficients")
    info = {"epochs": config.epochs, "basis": config.basis, "full_batch": config.full_batch}
    return Expansion(kernel, centers, beta, info=info), history


def solve_galerkin(problem: ProblemSpec, kernel: KernelSpec, centers, fixed: FixedQuadrature = FixedQuadrature(), seed: int = 0):
    """Assemble on the frozen quadrature and solve ``A beta = ell``.

    Returns ``(Expansion, condition number, fallback flag)``.
    """
    centers = check_distinct(centers)
    form = fixed_form(problem, kernel, centers, fixed, seed)
    beta, fallback = solve_spd(form.A, form.ell)
    if not np.all(np.isfinite(beta)):
        raise NumericalError("Galerkin solve produced non-finite coefficients")
    cond = condition_number(form.A)
    info = {"energy": energy_value(form, beta), "fallback": fallback, "cond": cond}
    return Expansion(kernel, centers, beta, info=info), cond, fallback
