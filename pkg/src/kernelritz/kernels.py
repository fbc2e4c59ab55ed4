"""Radial basis function kernels, their gradients and kernel matrices.

All kernels are normalised so that ``phi(0) = 1`` and are evaluated at the
scaled distance ``s = shape * |x - y|``.  Gradients are taken with respect to
the first argument.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

SINGULAR_RADIUS = 1e-12
DUPLICATE_RADIUS = 1e-12

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)


class SingularEvaluationError(ValueError):
    """Raised when a quantity is requested where it is not defined."""


class DegenerateCentersError(ValueError):
    """Raised when two centers coincide (up to ``DUPLICATE_RADIUS``)."""


class KernelFamily(str, enum.Enum):
    MATERN12 = "matern12"
    MATERN32 = "matern32"
    MATERN52 = "matern52"
    WENDLAND_C2 = "wendland_c2"


# smoothness nu for the Matern family; Wendland C2 in 2d has native space H^{5/2}
_NU = {
    KernelFamily.MATERN12: 0.5,
    KernelFamily.MATERN32: 1.5,
    KernelFamily.MATERN52: 2.5,
    KernelFamily.WENDLAND_C2: 1.5,
}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus shape parameter (inverse length scale)."""

    family: KernelFamily = KernelFamily.MATERN32
    shape: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        shape = float(self.shape)
        if not (shape > 0.0 and math.isfinite(shape)):
            raise ValueError(f"kernel shape must be a positive finite number, got {self.shape!r}")
        object.__setattr__(self, "shape", shape)

    @property
    def nu(self) -> float:
        return _NU[self.family]

    def tau(self, dim: int = 2) -> float:
        """Order of algebraic Fourier decay, ``nu + dim/2``."""
        return self.nu + dim / 2.0

    @property
    def label(self) -> str:
        return self.family.value


def profile(family: KernelFamily, s):
    """Radial profile ``phi(s)`` evaluated at scaled distances ``s >= 0``."""
    s = np.asarray(s, dtype=float)
    if family is KernelFamily.MATERN12:
        return np.exp(-s)
    if family is KernelFamily.MATERN32:
        t = _SQRT3 * s
        return (1.0 + t) * np.exp(-t)
    if family is KernelFamily.MATERN52:
        t = _SQRT5 * s
        return (1.0 + t + t * t / 3.0) * np.exp(-t)
    if family is KernelFamily.WENDLAND_C2:
        q = np.clip(1.0 - s, 0.0, None)
        return q**4 * (4.0 * s + 1.0)
    raise ValueError(f"unknown kernel family {family!r}")


def _as_points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        p = p[None, :]
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError(f"expected 2d points with shape (m, 2), got {p.shape}")
    return p


def _differences(x, y):
    x = _as_points(x)
    y = _as_points(y)
    dx = x[:, 0, None] - y[None, :, 0]
    dy = x[:, 1, None] - y[None, :, 1]
    return dx, dy, np.sqrt(dx * dx + dy * dy)


def _radial(family: KernelFamily, s):
    """``(phi(s), phi'(s)/s)`` sharing one exponential."""
    if family is KernelFamily.MATERN12:
        e = np.exp(-s)
        with np.errstate(divide="ignore", invalid="ignore"):
            return e, -e / s
    if family is KernelFamily.MATERN32:
        t = _SQRT3 * s
        e = np.exp(-t)
        return (1.0 + t) * e, -3.0 * e
    if family is KernelFamily.MATERN52:
        t = _SQRT5 * s
        e = np.exp(-t)
        return (1.0 + t + t * t / 3.0) * e, -(5.0 / 3.0) * (1.0 + t) * e
    if family is KernelFamily.WENDLAND_C2:
        q = np.clip(1.0 - s, 0.0, None)
        q3 = q**3
        return q3 * q * (4.0 * s + 1.0), -20.0 * q3
    raise ValueError(f"unknown kernel family {family!r}")


def _gradient_coefficient(spec: KernelSpec, r, s, dphi_s, at_center):
    if spec.family is KernelFamily.MATERN12:
        close = r < SINGULAR_RADIUS
        if close.any():
            if at_center != "zero":
                raise SingularEvaluationError(
                    "Matern12 gradient requested at a kernel center (distance "
                    f"{r[close].min():.3e} < {SINGULAR_RADIUS:g})"
                )
            dphi_s = np.where(close, 0.0, dphi_s)
    return dphi_s * spec.shape**2


def kernel_values(spec: KernelSpec, x, y) -> np.ndarray:
    """Matrix ``k(x_i, y_j)`` of shape (len(x), len(y))."""
    *_, r = _differences(x, y)
    return profile(spec.family, spec.shape * r)


def kernel_values_and_gradients(spec: KernelSpec, x, y, at_center: str = "raise"):
    """``(K, Gx, Gy)``: values and the two gradient components, each (len(x), len(y))."""
    dx, dy, r = _differences(x, y)
    s = spec.shape * r
    phi, dphi_s = _radial(spec.family, s)
    coef = _gradient_coefficient(spec, r, s, dphi_s, at_center)
    return phi, coef * dx, coef * dy


def kernel_gradients(spec: KernelSpec, x, y, at_center: str = "raise") -> np.ndarray:
    """Gradients ``grad_x k(x_i, y_j)`` with shape (len(x), len(y), 2).

    For Matern12 the gradient jumps at ``x = y``.  ``at_center="raise"``
    rejects such pairs, ``at_center="zero"`` returns the mean of the one-sided
    limits (zero), which is only appropriate inside quadrature sums where the
    point carries no measure.
    """
    _, gx, gy = kernel_values_and_gradients(spec, x, y, at_center)
    return np.stack([gx, gy], axis=-1)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    return float(kernel_values(spec, x, y)[0, 0])


def kernel_grad_x(spec: KernelSpec, x, y) -> np.ndarray:
    return kernel_gradients(spec, x, y)[0, 0]


def check_distinct(centers, radius: float = DUPLICATE_RADIUS) -> np.ndarray:
    centers = _as_points(centers)
    if len(centers) > 1:
        dmin = pdist(centers).min()
        if dmin < radius:
            raise DegenerateCentersError(f"centers are not pairwise distinct (min distance {dmin:.3e})")
    return centers


def kernel_matrix(spec: KernelSpec, centers) -> np.ndarray:
    """Symmetric kernel (Gram) matrix ``K_ij = k(x_i, x_j)``."""
    centers = check_distinct(centers)
    return kernel_values(spec, centers, centers)
