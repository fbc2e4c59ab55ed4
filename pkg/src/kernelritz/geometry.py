"""Computational domains, center placement, random quadrature and mesh norms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.spatial import cKDTree

CORNER_GUARD = 1e-12


@dataclass(frozen=True)
class BoundarySamples:
    """Points on the boundary with outward unit normals and measure weights."""

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.points)


class Domain:
    """Base class.  Subclasses describe the boundary by an arc-length chart."""

    kind: str = ""

    @property
    def area(self) -> float:
        raise NotImplementedError

    @property
    def perimeter(self) -> float:
        raise NotImplementedError

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        raise NotImplementedError

    def corners(self) -> np.ndarray:
        """Arc-length positions of the boundary kinks, in ``[0, perimeter)``."""
        raise NotImplementedError

    def contains(self, p, closed: bool = False) -> np.ndarray:
        raise NotImplementedError

    def boundary_chart(self, s) -> tuple[np.ndarray, np.ndarray]:
        """Map arc length ``s`` to (points, outward normals)."""
        raise NotImplementedError

    def boundary_distance(self, p) -> np.ndarray:
        raise NotImplementedError

    def to_config(self) -> dict:
        return {"domain.kind": self.kind}

    def gauss_interior(self, cells: int, order: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


def composite_gauss(a: float, b: float, cells: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Gauss-Legendre on ``[a, b]``."""
    x, w = leggauss(order)
    edges = np.linspace(a, b, cells + 1)
    h = np.diff(edges)
    nodes = edges[:-1, None] + 0.5 * (x[None, :] + 1.0) * h[:, None]
    return nodes.ravel(), (0.5 * w[None, :] * h[:, None]).ravel()


@dataclass(frozen=True)
class UnitSquare(Domain):
    kind = "unit_square"

    @property
    def area(self):
        return 1.0

    @property
    def perimeter(self):
        return 4.0

    @property
    def bbox(self):
        return (0.0, 1.0, 0.0, 1.0)

    def corners(self):
        return np.array([0.0, 1.0, 2.0, 3.0])

    def contains(self, p, closed=False):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        x, y = p[:, 0], p[:, 1]
        if closed:
            return (x >= 0.0) & (x <= 1.0) & (y >= 0.0) & (y <= 1.0)
        return (x > 0.0) & (x < 1.0) & (y > 0.0) & (y < 1.0)

    def boundary_chart(self, s):
        s = np.mod(np.asarray(s, dtype=float), 4.0)
        edge = np.minimum(np.floor(s).astype(int), 3)
        t = s - edge
        pts = np.empty((len(s), 2))
        nrm = np.empty((len(s), 2))
        # counter-clockwise from the origin
        table = [
            (lambda t: (t, 0.0 * t), (0.0, -1.0)),
            (lambda t: (1.0 + 0.0 * t, t), (1.0, 0.0)),
            (lambda t: (1.0 - t, 1.0 + 0.0 * t), (0.0, 1.0)),
            (lambda t: (0.0 * t, 1.0 - t), (-1.0, 0.0)),
        ]
        for k, (chart, normal) in enumerate(table):
            m = edge == k
            px, py = chart(t[m])
            pts[m, 0], pts[m, 1] = px, py
            nrm[m] = normal
        return pts, nrm

    def gauss_interior(self, cells, order):
        x, w = composite_gauss(0.0, 1.0, cells, order)
        X, Y = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()]), np.outer(w, w).ravel()

    def boundary_distance(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        x, y = p[:, 0], p[:, 1]
        inside = np.minimum.reduce([x, 1.0 - x, y, 1.0 - y])
        dx = np.maximum.reduce([-x, x - 1.0, np.zeros_like(x)])
        dy = np.maximum.reduce([-y, y - 1.0, np.zeros_like(y)])
        outside = np.hypot(dx, dy)
        return np.where(inside >= 0.0, inside, outside)


def polar_angle(p) -> np.ndarray:
    """Angle of each point in ``[0, 2*pi)``."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    theta = np.arctan2(p[:, 1], p[:, 0])
    theta = np.where(theta < 0.0, theta + 2.0 * math.pi, theta)
    # arctan2 may return exactly -0.0 or round up to 2*pi
    return np.where(theta >= 2.0 * math.pi, 0.0, theta)


@dataclass(frozen=True)
class CircularSector(Domain):
    """``{(r cos t, r sin t): 0 < r < radius, 0 < t < angle}``."""

    angle: float = 1.5 * math.pi
    radius: float = 1.5
    kind = "sector"

    def __post_init__(self):
        if not (0.0 < self.angle < 2.0 * math.pi):
            raise ValueError(f"sector angle must lie in (0, 2*pi), got {self.angle}")
        if not self.radius > 0.0:
            raise ValueError("sector radius must be positive")

    @property
    def area(self):
        return 0.5 * self.radius**2 * self.angle

    @property
    def perimeter(self):
        return 2.0 * self.radius + self.radius * self.angle

    @property
    def bbox(self):
        R = self.radius
        return (-R, R, -R, R)

    def corners(self):
        R = self.radius
        return np.array([0.0, R, R + R * self.angle])

    def contains(self, p, closed=False):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        r = np.hypot(p[:, 0], p[:, 1])
        theta = polar_angle(p)
        if closed:
            return (r <= self.radius * (1.0 + 1e-12)) & ((theta <= self.angle + 1e-12) | (r == 0.0))
        return (r > 0.0) & (r < self.radius) & (theta > 0.0) & (theta < self.angle)

    def boundary_chart(self, s):
        R, a = self.radius, self.angle
        s = np.mod(np.asarray(s, dtype=float), self.perimeter)
        pts = np.empty((len(s), 2))
        nrm = np.empty((len(s), 2))
        first = s < R
        arc = (s >= R) & (s < R + R * a)
        last = s >= R + R * a

        pts[first, 0], pts[first, 1] = s[first], 0.0
        nrm[first] = (0.0, -1.0)

        phi = (s[arc] - R) / R
        pts[arc, 0], pts[arc, 1] = R * np.cos(phi), R * np.sin(phi)
        nrm[arc, 0], nrm[arc, 1] = np.cos(phi), np.sin(phi)

        rr = self.perimeter - s[last]
        pts[last, 0], pts[last, 1] = rr * math.cos(a), rr * math.sin(a)
        # the interior lies clockwise of the ray at angle a
        nrm[last] = (-math.sin(a), math.cos(a))
        return pts, nrm

    def gauss_interior(self, cells, order):
        # polar tensor rule; cell counts follow the physical lengths
        ref = 2.0 * self.radius
        r, wr = composite_gauss(0.0, self.radius, max(1, math.ceil(cells * self.radius / ref)), order)
        t, wt = composite_gauss(0.0, self.angle, max(1, math.ceil(cells * self.radius * self.angle / ref)), order)
        R, T = np.meshgrid(r, t, indexing="ij")
        W = np.outer(wr * r, wt)
        return np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()]), W.ravel()

    def boundary_distance(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        r = np.hypot(p[:, 0], p[:, 1])
        theta = polar_angle(p)
        d_arc = np.where(theta <= self.angle, np.abs(self.radius - r), np.inf)
        dists = [d_arc]
        for direction in ((1.0, 0.0), (math.cos(self.angle), math.sin(self.angle))):
            d = np.asarray(direction)
            t = np.clip(p @ d, 0.0, self.radius)
            dists.append(np.hypot(p[:, 0] - t * d[0], p[:, 1] - t * d[1]))
        return np.minimum.reduce(dists)

    def to_config(self):
        return {"domain.kind": self.kind, "domain.angle": self.angle}


def is_interior(domain: Domain, p) -> bool | np.ndarray:
    """Strict interior test; scalar for a single point, mask otherwise."""
    arr = np.asarray(p, dtype=float)
    mask = domain.contains(arr)
    return bool(mask[0]) if arr.ndim == 1 else mask


def _boundary_arclength_points(domain: Domain, count: int) -> np.ndarray:
    s = np.arange(count) * (domain.perimeter / count)
    pts, _ = domain.boundary_chart(s)
    return pts


def place_centers(domain: Domain, n_per_dim: int) -> np.ndarray:
    """Uniform interior grid plus ``4n+4`` boundary points equispaced in arc length."""
    n = int(n_per_dim)
    if n < 1:
        raise ValueError("n_per_dim must be at least 1")
    xmin, xmax, ymin, ymax = domain.bbox
    gx = xmin + (xmax - xmin) * np.arange(1, n + 1) / (n + 1)
    gy = ymin + (ymax - ymin) * np.arange(1, n + 1) / (n + 1)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    grid = np.column_stack([X.ravel(), Y.ravel()])
    grid = grid[domain.contains(grid)]
    return np.vstack([grid, _boundary_arclength_points(domain, 4 * n + 4)])


def sample_interior(domain: Domain, count: int, rng: np.random.Generator):
    """``count`` uniform points in the domain by rejection from the bounding box.

    Returns (points, weights) with every weight equal to ``area / count``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    xmin, xmax, ymin, ymax = domain.bbox
    box_area = (xmax - xmin) * (ymax - ymin)
    accepted = []
    have = 0
    while have < count:
        need = count - have
        m = int(need * box_area / domain.area * 1.1) + 16
        cand = np.column_stack([rng.uniform(xmin, xmax, m), rng.uniform(ymin, ymax, m)])
        cand = cand[domain.contains(cand)]
        accepted.append(cand[:need])
        have += len(accepted[-1])
    points = np.vstack(accepted)
    return points, np.full(count, domain.area / count)


def sample_boundary(domain: Domain, count: int, rng: np.random.Generator) -> BoundarySamples:
    """``count`` points uniform in arc length with outward normals; corners are avoided."""
    if count < 1:
        raise ValueError("count must be at least 1")
    L = domain.perimeter
    kinks = np.append(domain.corners(), L)
    s = rng.uniform(0.0, L, count)
    while True:
        bad = np.min(np.abs(s[:, None] - kinks[None, :]), axis=1) < CORNER_GUARD
        if not bad.any():
            break
        s[bad] = rng.uniform(0.0, L, int(bad.sum()))
    pts, nrm = domain.boundary_chart(s)
    return BoundarySamples(pts, nrm, np.full(count, L / count))


def gauss_boundary(domain: Domain, cells: int, order: int) -> BoundarySamples:
    """Composite Gauss rule in arc length, one panel family per smooth boundary piece."""
    xmin, xmax, ymin, ymax = domain.bbox
    ref = max(xmax - xmin, ymax - ymin)
    breaks = np.append(domain.corners(), domain.perimeter)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        s, w = composite_gauss(a, b, max(1, math.ceil(cells * (b - a) / ref)), order)
        nodes.append(s)
        weights.append(w)
    pts, nrm = domain.boundary_chart(np.concatenate(nodes))
    return BoundarySamples(pts, nrm, np.concatenate(weights))


def bbox_grid(domain: Domain, per_dim: int, closed: bool = True) -> np.ndarray:
    """Uniform ``per_dim x per_dim`` bounding-box grid restricted to the domain."""
    xmin, xmax, ymin, ymax = domain.bbox
    X, Y = np.meshgrid(np.linspace(xmin, xmax, per_dim), np.linspace(ymin, ymax, per_dim), indexing="ij")
    grid = np.column_stack([X.ravel(), Y.ravel()])
    return grid[domain.contains(grid, closed=closed)]


def mesh_norm(domain: Domain, centers, resolution: int = 400) -> float:
    """Brute-force fill distance ``sup_x min_i |x - x_i|`` over a probe grid."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.size == 0:
        raise ValueError("mesh norm of an empty center set is undefined")
    probes = bbox_grid(domain, resolution)
    dist, _ = cKDTree(centers).query(probes)
    return float(dist.max())
