"""Discretisation of the Nitsche energy over a kernel expansion.

For a quadrature set the energy of ``psi[beta]`` is the quadratic
``I(beta) = 1/2 beta^T A beta - beta^T ell`` with

    A_ij = sum_q w_q [kappa grad k_j . grad k_i + rho k_j k_i](x_q)
         + sum_b w_b [-(grad k_j . n) k_i - (grad k_i . n) k_j + C_pen k_j k_i](x_b)
    ell_i = sum_q w_q f k_i + sum_b w_b [-(grad k_i . n) g_D + C_pen g_D k_i]
          + sum_{b on Neumann part} w_b g_N k_i

The constant part of the energy (terms in ``g_D`` only) is dropped, so
``I(0) = 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .densela import FactorizationResult
from .geometry import BoundarySamples, Domain, sample_boundary, sample_interior
from .kernels import KernelSpec, kernel_values_and_gradients
from .problems import ProblemSpec

logger = logging.getLogger(__name__)

CHUNK = 4096


@dataclass(frozen=True)
class QuadratureSet:
    interior_points: np.ndarray
    interior_weights: np.ndarray
    boundary: BoundarySamples

    @property
    def sizes(self):
        return len(self.interior_points), len(self.boundary)


@dataclass
class QuadraticForm:
    A: np.ndarray
    ell: np.ndarray
    basis: str = "direct"

    @property
    def size(self) -> int:
        return len(self.ell)


def sample_quadrature(domain: Domain, n_interior: int, n_boundary: int, rng: np.random.Generator) -> QuadratureSet:
    pts, w = sample_interior(domain, n_interior, rng)
    return QuadratureSet(pts, w, sample_boundary(domain, n_boundary, rng))


def default_batch_sizes(n_centers: int) -> tuple[int, int]:
    return max(4 * n_centers, 1024), max(n_centers, 256)


class BatchEnergy:
    """Kernel data on one quadrature set; applies ``A`` without forming it."""

    def __init__(self, problem: ProblemSpec, kernel: KernelSpec, centers, quad: QuadratureSet):
        centers = np.asarray(centers, dtype=float)
        self.n = len(centers)
        self.c_pen = problem.c_pen

        xq = quad.interior_points
        self.Kq, self.Gx, self.Gy = kernel_values_and_gradients(kernel, xq, centers)
        self.w_kappa = quad.interior_weights * problem.kappa(xq) if len(xq) else np.zeros(0)
        self.w_rho = quad.interior_weights * problem.rho(xq) if len(xq) else np.zeros(0)
        if np.any(self.w_rho < 0.0):
            raise ValueError("reaction coefficient rho must be non-negative")
        self.has_rho = bool(np.any(self.w_rho != 0.0))

        bnd = quad.boundary
        xb = bnd.points
        self.Kb, gbx, gby = kernel_values_and_gradients(kernel, xb, centers)
        self.Dn = gbx * bnd.normals[:, :1] + gby * bnd.normals[:, 1:]
        dirichlet = np.ones(len(xb), dtype=bool)
        if problem.neumann_part is not None and len(xb):
            dirichlet = ~np.asarray(problem.neumann_part(xb), dtype=bool)
        self.w_dir = np.where(dirichlet, bnd.weights, 0.0)

        ell = np.zeros(self.n)
        if len(xq):
            ell += self.Kq.T @ (quad.interior_weights * problem.f(xq))
        if len(xb):
            g = np.zeros(len(xb))
            if dirichlet.any():
                g[dirichlet] = problem.g_dirichlet(xb[dirichlet])
            wg = self.w_dir * g
            ell += -self.Dn.T @ wg + self.c_pen * (self.Kb.T @ wg)
            if not dirichlet.all():
                neu = ~dirichlet
                gn = np.zeros(len(xb))
                gn[neu] = problem.g_neumann(xb[neu])
                ell += self.Kb.T @ (np.where(neu, bnd.weights, 0.0) * gn)
        self.ell = ell

    def apply(self, beta) -> np.ndarray:
        """``A @ beta``."""
        out = self.Gx.T @ (self.w_kappa * (self.Gx @ beta)) + self.Gy.T @ (self.w_kappa * (self.Gy @ beta))
        if self.has_rho:
            out += self.Kq.T @ (self.w_rho * (self.Kq @ beta))
        kb = self.Kb @ beta
        dn = self.Dn @ beta
        out += -self.Kb.T @ (self.w_dir * dn) - self.Dn.T @ (self.w_dir * kb) + self.c_pen * (self.Kb.T @ (self.w_dir * kb))
        return out

    def gradient(self, beta) -> np.ndarray:
        return self.apply(beta) - self.ell

    def value(self, beta) -> float:
        return float(0.5 * beta @ self.apply(beta) - beta @ self.ell)

    def matrix(self) -> np.ndarray:
        """Unsymmetrised ``A`` accumulated from the stored data."""
        A = self.Gx.T @ (self.w_kappa[:, None] * self.Gx)
        A += self.Gy.T @ (self.w_kappa[:, None] * self.Gy)
        if self.has_rho:
            A += self.Kq.T @ (self.w_rho[:, None] * self.Kq)
        M = self.Kb.T @ (self.w_dir[:, None] * self.Dn)
        A += -M - M.T + self.c_pen * (self.Kb.T @ (self.w_dir[:, None] * self.Kb))
        return A

    def to_form(self) -> QuadraticForm:
        A = self.matrix()
        return QuadraticForm(0.5 * (A + A.T), self.ell.copy())


def _empty_boundary() -> BoundarySamples:
    return BoundarySamples(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0))


def assemble(problem: ProblemSpec, kernel: KernelSpec, centers, quad: QuadratureSet, chunk: int = CHUNK) -> QuadraticForm:
    """Accumulate ``(A, ell)`` over the quadrature set in fixed-order chunks."""
    centers = np.asarray(centers, dtype=float)
    n = len(centers)
    if quad.sizes == (0, 0):
        raise ValueError("empty quadrature set")
    A = np.zeros((n, n))
    ell = np.zeros(n)
    no_interior = (np.zeros((0, 2)), np.zeros(0))
    pieces = []
    nq, nb = quad.sizes
    for start in range(0, nq, chunk):
        sl = slice(start, start + chunk)
        pieces.append(QuadratureSet(quad.interior_points[sl], quad.interior_weights[sl], _empty_boundary()))
    bnd = quad.boundary
    for start in range(0, nb, chunk):
        sl = slice(start, start + chunk)
        pieces.append(QuadratureSet(*no_interior, BoundarySamples(bnd.points[sl], bnd.normals[sl], bnd.weights[sl])))
    for piece in pieces:
        batch = BatchEnergy(problem, kernel, centers, piece)
        A += batch.matrix()
        ell += batch.ell
    return QuadraticForm(0.5 * (A + A.T), ell)


def _check_dims(form: QuadraticForm, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (form.size,):
        raise ValueError(f"coefficient vector has shape {beta.shape}, form has size {form.size}")
    return beta


def energy_value(form: QuadraticForm, beta) -> float:
    beta = _check_dims(form, beta)
    return float(0.5 * beta @ (form.A @ beta) - beta @ form.ell)


def energy_gradient(form: QuadraticForm, beta) -> np.ndarray:
    beta = _check_dims(form, beta)
    return form.A @ beta - form.ell


def _warn_batch(n_centers, n_interior):
    if n_interior < n_centers:
        logger.warning(
            "interior batch of %d points is smaller than the %d centers; use more quadrature points than centers",
            n_interior,
            n_centers,
        )


def mc_energy(problem, kernel, centers, batch_sizes, rng) -> BatchEnergy:
    n_int, n_bnd = batch_sizes
    if n_int < 1 or n_bnd < 1:
        raise ValueError("batch sizes must be at least 1")
    _warn_batch(len(centers), n_int)
    return BatchEnergy(problem, kernel, centers, sample_quadrature(problem.domain, n_int, n_bnd, rng))


def mc_batch(problem, kernel, centers, batch_sizes, rng) -> QuadraticForm:
    """Quadratic form on a freshly drawn Monte Carlo quadrature set."""
    return mc_energy(problem, kernel, centers, batch_sizes, rng).to_form()


def to_lagrange(form: QuadraticForm, kfac: FactorizationResult) -> QuadraticForm:
    """Express the form in cardinal coordinates ``c = K beta``: ``K^-1 A K^-1``, ``K^-1 ell``."""
    if form.basis != "direct":
        raise ValueError("form is already in the Lagrange basis")
    X = kfac.solve(form.A)
    Ap = kfac.solve(X.T)
    return QuadraticForm(0.5 * (Ap + Ap.T), kfac.solve(form.ell), basis="lagrange")
