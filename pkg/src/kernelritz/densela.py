"""Dense linear algebra: SPD solves with a least-squares fallback, conditioning, rates."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

logger = logging.getLogger(__name__)

FALLBACK_RTOL = 1e-14


@dataclass
class FactorizationResult:
    factor: object
    success: bool
    fallback: bool

    def solve(self, b):
        if self.success:
            return sla.cho_solve(self.factor, b)
        U, s, Vt = self.factor
        keep = s > FALLBACK_RTOL * s[0]
        coef = U[:, keep].T @ b
        coef = coef / (s[keep, None] if coef.ndim > 1 else s[keep])
        return Vt[keep].T @ coef


def _check_square(A, b=None):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if b is not None and np.shape(b)[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {A.shape}, right-hand side {np.shape(b)}")
    return A


def factorize_spd(A) -> FactorizationResult:
    """Cholesky factorisation; on failure keep a truncated SVD instead."""
    A = _check_square(A)
    try:
        return FactorizationResult(sla.cho_factor(A, lower=True), True, False)
    except np.linalg.LinAlgError:
        logger.warning("Cholesky factorisation failed for %dx%d matrix; using truncated SVD", *A.shape)
        return FactorizationResult(sla.svd(A), False, True)


def solve_spd(A, b):
    """Solve ``A x = b`` for symmetric ``A``.  Returns ``(x, fallback)``."""
    A = _check_square(A, b)
    fac = factorize_spd(A)
    return fac.solve(np.asarray(b, dtype=float)), fac.fallback


def condition_number(A) -> float:
    """Spectral condition number ``s_max / s_min`` from a full SVD."""
    A = _check_square(A)
    s = sla.svdvals(A)
    if s[0] == 0.0:
        raise ValueError("condition number of the zero matrix is undefined")
    if s[-1] <= np.finfo(float).tiny:
        return float("inf")
    return float(s[0] / s[-1])


def loglog_rate(hs, errors):
    """Least-squares fit ``log(err) = slope * log(h) + intercept``."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if hs.shape != errors.shape or hs.ndim != 1:
        raise ValueError("hs and errors must be 1d sequences of equal length")
    if len(hs) < 2:
        raise ValueError("need at least two points for a rate")
    if np.any(hs <= 0.0) or np.any(errors <= 0.0):
        raise ValueError("mesh norms and errors must be positive")
    x, y = np.log(hs), np.log(errors)
    xm, ym = x.mean(), y.mean()
    slope = np.dot(x - xm, y - ym) / np.dot(x - xm, x - xm)
    return float(slope), float(ym - slope * xm)
