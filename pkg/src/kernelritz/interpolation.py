"""Kernel expansions, interpolation and Lagrange (cardinal) functions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .densela import factorize_spd, solve_spd
from .kernels import KernelSpec, check_distinct, kernel_gradients, kernel_matrix, kernel_values

logger = logging.getLogger(__name__)


@dataclass
class Expansion:
    """``psi(x) = sum_i beta_i k(x, x_i)``."""

    kernel: KernelSpec
    centers: np.ndarray
    beta: np.ndarray
    info: dict = field(default_factory=dict)

    def __call__(self, points):
        return evaluate_expansion(self.kernel, self.centers, self.beta, points)

    def grad(self, points, at_center="raise"):
        return evaluate_expansion_grad(self.kernel, self.centers, self.beta, points, at_center=at_center)

    @property
    def size(self) -> int:
        return len(self.beta)


def evaluate_expansion(kernel: KernelSpec, centers, beta, points) -> np.ndarray:
    return kernel_values(kernel, points, centers) @ np.asarray(beta, dtype=float)


def evaluate_expansion_grad(kernel: KernelSpec, centers, beta, points, at_center="raise") -> np.ndarray:
    G = kernel_gradients(kernel, points, centers, at_center=at_center)
    return np.einsum("mnd,n->md", G, np.asarray(beta, dtype=float))


def interpolate(kernel: KernelSpec, centers, values, ridge: float = 0.0) -> Expansion:
    """Solve ``(K + ridge*I) beta = values``; unregularised by default."""
    centers = check_distinct(centers)
    values = np.asarray(values, dtype=float)
    if values.shape != (len(centers),):
        raise ValueError(f"expected {len(centers)} values, got shape {values.shape}")
    K = kernel_matrix(kernel, centers)
    if ridge:
        K = K + ridge * np.eye(len(K))
    beta, fallback = solve_spd(K, values)
    if fallback:
        logger.warning("kernel matrix is numerically singular; interpolant uses truncated SVD")
    return Expansion(kernel, centers, beta, info={"fallback": fallback})


def lagrange_basis_values(kernel: KernelSpec, centers, points) -> np.ndarray:
    """Cardinal functions ``l_j(points)`` as an (m, n) matrix, ``l_j(x_i) = delta_ij``."""
    centers = check_distinct(centers)
    fac = factorize_spd(kernel_matrix(kernel, centers))
    if fac.fallback:
        raise np.linalg.LinAlgError("kernel matrix is numerically singular; no Lagrange basis")
    # L = V K^{-1} with K symmetric, computed as (K^{-1} V^T)^T
    return fac.solve(kernel_values(kernel, points, centers).T).T
