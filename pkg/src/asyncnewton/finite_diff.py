"""Central-difference gradient and Hessian stencils and the Newton direction."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import ObjectiveSpec, as_point, as_steps, contains


class StencilOutOfBounds(ValueError):
    pass


class EvalCache:
    """Memoizes objective values by the exact bit pattern of the point."""

    def __init__(self):
        self._values: dict[bytes, float] = {}

    def __len__(self):
        return len(self._values)

    @property
    def count(self) -> int:
        return len(self._values)

    def __call__(self, f: ObjectiveSpec, x: np.ndarray) -> float:
        key = np.ascontiguousarray(x, dtype=float).tobytes()
        try:
            return self._values[key]
        except KeyError:
            if not contains(f.bounds, x):
                raise StencilOutOfBounds(f"stencil point {x} lies outside the bounds") from None
            value = f(x)
            self._values[key] = value
            return value


def fd_gradient(f: ObjectiveSpec, x, s, cache: EvalCache | None = None) -> np.ndarray:
    """Central-difference gradient, 2n evaluations on an empty cache."""
    cache = EvalCache() if cache is None else cache
    x = as_point(x)
    s = as_steps(s, x.size)
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = s[i]
        g[i] = (cache(f, x + e) - cache(f, x - e)) / (2.0 * s[i])
    return g


def fd_hessian(f: ObjectiveSpec, x, s, cache: EvalCache | None = None) -> np.ndarray:
    """Four-point Hessian stencil.

    The diagonal uses ``x ± 2 s_i`` and ``x``; off-diagonal entries are computed
    once for ``i < j`` and mirrored, so the result is exactly symmetric and an
    empty cache sees at most ``2n^2 + 1`` unique points.
    """
    cache = EvalCache() if cache is None else cache
    x = as_point(x)
    s = as_steps(s, x.size)
    n = x.size
    h = np.empty((n, n))
    f0 = cache(f, x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = s[i]
        h[i, i] = (cache(f, x + 2 * ei) - 2.0 * f0 + cache(f, x - 2 * ei)) / (4.0 * s[i] ** 2)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = s[j]
            h[i, j] = (
                cache(f, x + ei + ej) - cache(f, x - ei + ej)
                - cache(f, x + ei - ej) + cache(f, x - ei - ej)
            ) / (4.0 * s[i] * s[j])
            h[j, i] = h[i, j]
    return h


class NewtonStep(NamedTuple):
    direction: np.ndarray
    fallback: bool


MAX_CONDITION = 1e12


def newton_direction(g, h) -> NewtonStep:
    """Solve ``H d = -g``; fall back to ``d = -g`` when H is singular or ill-conditioned."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if h.shape != (g.size, g.size):
        raise ValueError(f"gradient of length {g.size} does not match Hessian of shape {h.shape}")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
        raise ValueError("gradient and Hessian must be finite")
    if not np.any(g):
        return NewtonStep(np.zeros_like(g), False)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(h)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        return NewtonStep(-g, True)
    return NewtonStep(np.linalg.solve(h, -g), False)
