"""Quadratic surrogate regression: gradient and Hessian from scattered evaluations.

The fit is done in offsets ``delta = x - center`` so that the linear and
quadratic coefficients are the derivatives at the regression center. Column
layout of the design matrix, for ``n`` parameters::

    [1, d_0 .. d_{n-1}, d_0^2/2 .. d_{n-1}^2/2, d_j d_k for j < k (row-major)]

Cross columns carry no 1/2 factor, so their coefficients are ``H[j, k]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DimensionError, EvaluationRecord, as_point


class RankDeficientError(np.linalg.LinAlgError):
    """The design matrix does not have full column rank."""

    def __init__(self, rank: int, columns: int, rows: int):
        super().__init__(f"design matrix has rank {rank} < {columns} columns ({rows} rows)")
        self.rank = rank
        self.columns = columns
        self.rows = rows


def n_columns(n: int) -> int:
    return 1 + 2 * n + n * (n - 1) // 2


def build_design_matrix(deltas, n: int) -> np.ndarray:
    deltas = np.asarray(deltas, dtype=float)
    if deltas.ndim == 1 and n == 1:
        deltas = deltas[:, None]
    if deltas.ndim != 2 or deltas.shape[1] != n:
        raise DimensionError(f"expected offsets of shape (m, {n}), got {deltas.shape}")
    m = deltas.shape[0]
    cols = n_columns(n)
    if m < cols:
        raise RankDeficientError(m, cols, m)
    j, k = np.triu_indices(n, 1)
    return np.hstack([
        np.ones((m, 1)),
        deltas,
        0.5 * deltas ** 2,
        deltas[:, j] * deltas[:, k],
    ])


def fit_least_squares(x: np.ndarray, y) -> tuple[np.ndarray, float]:
    """Least-squares coefficients and residual 2-norm.

    Columns are equilibrated before an SVD-based LAPACK solve; the normal
    equations are never formed.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape != (x.shape[0],):
        raise DimensionError(f"{x.shape[0]} design rows but {y.size} targets")
    scale = np.linalg.norm(x, axis=0)
    scale[scale == 0] = 1.0
    coef, _, rank, _ = np.linalg.lstsq(x / scale, y, rcond=None)
    if rank < x.shape[1]:
        raise RankDeficientError(int(rank), x.shape[1], x.shape[0])
    coef = coef / scale
    residual = float(np.linalg.norm(x @ coef - y))
    return coef, residual


@dataclass(frozen=True)
class QuadraticModel:
    coefficients: np.ndarray
    intercept: float
    gradient: np.ndarray
    hessian: np.ndarray
    residual_norm: float
    r_squared: float
    center: np.ndarray

    def predict(self, x) -> float:
        d = np.asarray(x, dtype=float) - self.center
        return float(self.intercept + self.gradient @ d + 0.5 * d @ self.hessian @ d)


def extract_model(coef, n: int, center, residual_norm: float = 0.0,
                  r_squared: float = 1.0) -> QuadraticModel:
    coef = np.asarray(coef, dtype=float)
    if coef.size != n_columns(n):
        raise DimensionError(f"expected {n_columns(n)} coefficients for n={n}, got {coef.size}")
    h = np.diag(coef[1 + n:1 + 2 * n]).astype(float)
    j, k = np.triu_indices(n, 1)
    h[j, k] = coef[1 + 2 * n:]
    h[k, j] = coef[1 + 2 * n:]
    return QuadraticModel(
        coefficients=coef,
        intercept=float(coef[0]),
        gradient=coef[1:1 + n].copy(),
        hessian=h,
        residual_norm=float(residual_norm),
        r_squared=float(r_squared),
        center=as_point(center, n),
    )


def regress(center, points, values) -> QuadraticModel:
    """Fit the quadratic surrogate around ``center`` to ``(points, values)``."""
    center = np.asarray(center, dtype=float)
    n = center.size
    points = np.asarray(points, dtype=float).reshape(-1, n)
    y = np.asarray(values, dtype=float)
    if not (np.all(np.isfinite(points)) and np.all(np.isfinite(y))):
        raise ValueError("regression inputs must be finite")
    x = build_design_matrix(points - center, n)
    coef, residual = fit_least_squares(x, y)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - residual ** 2 / ss_tot if ss_tot > 0 else 1.0
    return extract_model(coef, n, center, residual, min(r2, 1.0))


def regress_model(center, evaluations: Sequence[EvaluationRecord]) -> QuadraticModel:
    points = np.array([e.point for e in evaluations], dtype=float)
    values = np.array([e.fitness for e in evaluations], dtype=float)
    return regress(center, points, values)
