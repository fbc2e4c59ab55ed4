"""PDE data for ``-div(kappa grad u) + rho u = f`` with Nitsche-imposed Dirichlet data.

Every field is a callable taking an ``(m, 2)`` array of points and returning
an ``(m,)`` array (gradients return ``(m, 2)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .geometry import CircularSector, Domain, UnitSquare, polar_angle
from .kernels import SingularEvaluationError

Field = Callable[[np.ndarray], np.ndarray]


def constant(value: float) -> Field:
    def field(p):
        return np.full(len(np.atleast_2d(p)), float(value))

    return field


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain: Domain
    kappa: Field
    rho: Field
    f: Field
    g_dirichlet: Field
    c_pen: float = 100.0
    g_neumann: Optional[Field] = None
    # mask of boundary points belonging to the Neumann part; None means all Dirichlet
    neumann_part: Optional[Callable[[np.ndarray], np.ndarray]] = None
    exact: Optional[Field] = None
    exact_grad: Optional[Field] = None
    regularity: float = math.inf

    def __post_init__(self):
        if not self.c_pen > 0.0:
            raise ValueError(f"penalty parameter must be positive, got {self.c_pen}")
        if (self.g_neumann is None) != (self.neumann_part is None):
            raise ValueError("g_neumann and neumann_part must be given together")

    @property
    def has_exact(self) -> bool:
        return self.exact is not None and self.exact_grad is not None

    def with_penalty(self, c_pen: float) -> "ProblemSpec":
        return replace(self, c_pen=float(c_pen))


def smooth_poisson(c_pen: float = 100.0) -> ProblemSpec:
    """``-Laplace u = 4`` on the unit square with ``u = 1 - x^2 - y^2``."""

    def u(p):
        p = np.atleast_2d(p)
        return 1.0 - p[:, 0] ** 2 - p[:, 1] ** 2

    def grad_u(p):
        return -2.0 * np.atleast_2d(p)

    return ProblemSpec(
        name="smooth_poisson",
        domain=UnitSquare(),
        kappa=constant(1.0),
        rho=constant(0.0),
        f=constant(4.0),
        g_dirichlet=u,
        c_pen=c_pen,
        exact=u,
        exact_grad=grad_u,
    )


def _sector_angle(p, alpha):
    theta = polar_angle(p)
    # points just below the ray theta = 0 belong to the closure through theta ~ 0
    theta = np.where(theta > 0.5 * (alpha + 2.0 * math.pi), theta - 2.0 * math.pi, theta)
    return np.clip(theta, 0.0, alpha)


def singular_sector(alpha: float = 1.5 * math.pi, c_pen: float = 100.0) -> ProblemSpec:
    """Laplace problem on a re-entrant sector with ``u = r^(1/alpha) sin(theta/alpha) + 1``."""
    domain = CircularSector(angle=alpha)

    def u(p):
        p = np.atleast_2d(p)
        r = np.hypot(p[:, 0], p[:, 1])
        return r ** (1.0 / alpha) * np.sin(_sector_angle(p, alpha) / alpha) + 1.0

    def grad_u(p):
        p = np.atleast_2d(p)
        r = np.hypot(p[:, 0], p[:, 1])
        if np.any(r < 1e-12):
            raise SingularEvaluationError("gradient of the corner singularity requested at the origin")
        theta = _sector_angle(p, alpha)
        scale = r ** (1.0 / alpha - 1.0) / alpha
        gr = scale * np.sin(theta / alpha)
        gt = scale * np.cos(theta / alpha)
        c, s = np.cos(theta), np.sin(theta)
        return np.column_stack([gr * c - gt * s, gr * s + gt * c])

    return ProblemSpec(
        name="singular_sector",
        domain=domain,
        kappa=constant(1.0),
        rho=constant(0.0),
        f=constant(0.0),
        g_dirichlet=u,
        c_pen=c_pen,
        exact=u,
        exact_grad=grad_u,
        regularity=1.0 + 1.0 / alpha,
    )


PROBLEMS = {
    "smooth_poisson": smooth_poisson,
    "singular_sector": singular_sector,
}


def make_problem(name: str, c_pen: float = 100.0, angle: Optional[float] = None) -> ProblemSpec:
    if name not in PROBLEMS:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}")
    if name == "singular_sector" and angle is not None:
        return singular_sector(alpha=angle, c_pen=c_pen)
    return PROBLEMS[name](c_pen=c_pen)
