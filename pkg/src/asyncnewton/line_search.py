"""Randomized line search along a direction, plus Armijo backtracking for the baselines."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import Bounds, EvaluationRecord, ObjectiveSpec, as_point, contains

DEFAULT_ALPHA_RANGE = (-0.5, 2.0)


class EmptyIntervalError(ValueError):
    pass


@dataclass(frozen=True)
class LineSpec:
    origin: np.ndarray
    direction: np.ndarray
    alpha_min: float = DEFAULT_ALPHA_RANGE[0]
    alpha_max: float = DEFAULT_ALPHA_RANGE[1]

    def __post_init__(self):
        origin = as_point(self.origin)
        direction = as_point(self.direction, origin.size)
        if not self.alpha_min < self.alpha_max:
            raise ValueError("alpha_min must be below alpha_max")
        if not np.any(direction):
            raise ValueError("line direction is the zero vector")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)

    def point(self, alpha: float) -> np.ndarray:
        return self.origin + alpha * self.direction

    def alpha_of(self, p) -> float:
        """Step length whose point is closest to ``p``."""
        d = self.direction
        return float((np.asarray(p) - self.origin) @ d / (d @ d))


class AlphaInterval(NamedTuple):
    lo: float
    hi: float


def _pull_inside(line: LineSpec, bounds: Bounds, alpha: float) -> float:
    # step alpha toward zero one ulp at a time until rounding keeps the point in the box
    for _ in range(64):
        if contains(bounds, line.point(alpha)):
            return alpha
        alpha = float(np.nextafter(alpha, 0.0))
    raise EmptyIntervalError("could not place the interval endpoint inside the bounds")


def clip_alpha(line: LineSpec, bounds: Bounds) -> AlphaInterval:
    """Intersect the requested step range with the steps that stay inside ``bounds``."""
    if not contains(bounds, line.origin):
        raise ValueError("line origin lies outside the bounds")
    lo, hi = float(line.alpha_min), float(line.alpha_max)
    d = line.direction
    nz = d != 0
    with np.errstate(divide="ignore", over="ignore"):
        a = (bounds.lower[nz] - line.origin[nz]) / d[nz]
        b = (bounds.upper[nz] - line.origin[nz]) / d[nz]
    lo = max(lo, float(np.max(np.minimum(a, b))))
    hi = min(hi, float(np.min(np.maximum(a, b))))
    if lo > hi:
        raise EmptyIntervalError(f"requested range [{line.alpha_min}, {line.alpha_max}] leaves the bounds")
    lo = _pull_inside(line, bounds, lo)
    hi = _pull_inside(line, bounds, hi)
    return AlphaInterval(lo, max(lo, hi))


def sample_line(line: LineSpec, clipped: AlphaInterval, r: float) -> np.ndarray:
    """Point at fraction ``r`` of the clipped step interval."""
    if not 0.0 <= r < 1.0:
        raise ValueError(f"r must lie in [0, 1), got {r}")
    alpha = min(clipped.lo + r * (clipped.hi - clipped.lo), clipped.hi)
    return line.point(alpha)


def select_best(results: Sequence[EvaluationRecord]) -> EvaluationRecord:
    """Lowest fitness; ties go to the earliest record in arrival order."""
    if not results:
        raise ValueError("no results to select from")
    best = 0
    for i, rec in enumerate(results):
        if rec.fitness < results[best].fitness:
            best = i
    return results[best]


class BacktrackResult(NamedTuple):
    point: np.ndarray
    fitness: float
    alpha: float
    evaluations: int


def backtracking_search(f: ObjectiveSpec, x, d, bounds: Optional[Bounds] = None,
                        fx: Optional[float] = None, slope: Optional[float] = None,
                        alpha_max: float = 1.0, c1: float = 1e-4,
                        max_halvings: int = 50) -> BacktrackResult:
    """Armijo backtracking by halving from the largest feasible step up to ``alpha_max``.

    ``slope`` is the directional derivative along ``d``; it is estimated by a
    central directional difference when not supplied. Returns ``x`` itself
    when no step improves on ``f(x)``.
    """
    bounds = f.bounds if bounds is None else bounds
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    evals = 0
    if fx is None:
        fx = f(x)
        evals += 1
    if not np.any(d):
        return BacktrackResult(x, fx, 0.0, evals)
    interval = clip_alpha(LineSpec(x, d, 0.0, alpha_max), bounds)
    if interval.hi <= 0:
        return BacktrackResult(x, fx, 0.0, evals)
    if slope is None:
        h = min(1e-6, 0.5 * interval.hi)
        forward = f(x + h * d)
        evals += 1
        if contains(bounds, x - h * d):
            slope = (forward - f(x - h * d)) / (2 * h)
            evals += 1
        else:
            slope = (forward - fx) / h
    alpha = interval.hi
    for _ in range(max_halvings + 1):
        trial = x + alpha * d
        ft = f(trial)
        evals += 1
        if ft < fx and ft <= fx + c1 * alpha * slope:
            return BacktrackResult(trial, ft, alpha, evals)
        alpha *= 0.5
    return BacktrackResult(x, fx, 0.0, evals)
