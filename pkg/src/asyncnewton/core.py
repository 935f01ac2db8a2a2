"""Shared domain types, box geometry, seeded randomness and the benchmark suite.

Points in the search space are plain 1-d float numpy arrays. Objectives are
minimized throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional, Sequence

import numpy as np

BENCHMARKS = ("sphere", "quadratic_spd", "rosenbrock", "rastrigin", "double_well")


class DimensionError(ValueError):
    """Raised when two vectors (or a vector and an objective) disagree in length."""


def as_point(values, n: Optional[int] = None) -> np.ndarray:
    """Convert ``values`` to a finite 1-d float array, optionally checking length."""
    p = np.array(values, dtype=float).reshape(-1)
    if n is not None and p.size != n:
        raise DimensionError(f"expected {n} coordinates, got {p.size}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"point has non-finite coordinates: {p}")
    return p


def as_steps(values, n: int) -> np.ndarray:
    """Step vector of length ``n``; a scalar is broadcast to every coordinate."""
    s = np.array(values, dtype=float).reshape(-1)
    if s.size == 1 and n != 1:
        s = np.full(n, s[0])
    if s.size != n:
        raise DimensionError(f"expected {n} steps, got {s.size}")
    if not np.all(np.isfinite(s)) or np.any(s <= 0):
        raise ValueError("step sizes must be finite and strictly positive")
    return s


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_point(self.lower)
        hi = as_point(self.upper)
        if lo.size != hi.size:
            raise DimensionError("lower and upper bounds differ in length")
        if np.any(lo >= hi):
            raise ValueError("every lower bound must be strictly below its upper bound")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int) -> "Bounds":
        return cls(np.full(n, float(lo)), np.full(n, float(hi)))

    @property
    def dimension(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


def contains(bounds: Bounds, p) -> bool:
    """True iff ``p`` lies in the closed box."""
    p = np.asarray(p, dtype=float)
    if p.shape != bounds.lower.shape:
        raise DimensionError(f"point has {p.size} coordinates, bounds have {bounds.dimension}")
    return bool(np.all(bounds.lower <= p) and np.all(p <= bounds.upper))


@dataclass(frozen=True)
class EvaluationRecord:
    """One function evaluation result.

    ``source`` is ``"oracle"`` for in-process evaluations or a worker id.
    ``tag`` identifies the driver phase the point was planned for.
    """

    point: np.ndarray
    fitness: float
    source: Any = "oracle"
    tag: Any = None


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 stream; identical seeds give identical draws on every platform."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def fork_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent child stream derived from ``seed`` and integer ``keys``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


def sample_box(center, s, bounds: Bounds, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the axis box ``center ± s`` intersected with ``bounds``."""
    center = np.asarray(center, dtype=float)
    if not contains(bounds, center):
        raise ValueError("sampling center lies outside the bounds")
    lo = np.maximum(center - s, bounds.lower)
    hi = np.minimum(center + s, bounds.upper)
    p = rng.uniform(lo, hi)
    # uniform() can round onto hi; keep the closed-box guarantee
    return np.clip(p, lo, hi)


@dataclass(frozen=True)
class ObjectiveSpec:
    name: str
    dimension: int
    bounds: Bounds
    evaluate: Callable[[np.ndarray], float]
    analytic_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    known_minimum: Optional[tuple[np.ndarray, float]] = None
    simulated_cost: float = 1.0
    params: dict = field(default_factory=dict)

    def __call__(self, x) -> float:
        return float(self.evaluate(np.asarray(x, dtype=float)))

    @property
    def f_star(self) -> Optional[float]:
        return None if self.known_minimum is None else self.known_minimum[1]


def _sphere(x):
    return float(np.dot(x, x))


def _rosenbrock(x):
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def _rosenbrock_grad(x):
    g = np.zeros_like(x)
    t = x[1:] - x[:-1] ** 2
    g[:-1] = -400.0 * x[:-1] * t - 2.0 * (1.0 - x[:-1])
    g[1:] += 200.0 * t
    return g


def _rastrigin(x):
    return float(10.0 * x.size + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


def _double_well(x):
    return float((x[0] ** 2 - 1.0) ** 2 + 0.2 * x[0])


def random_spd(n: int, rng: np.random.Generator, condition: float = 1e3) -> np.ndarray:
    """Random symmetric positive-definite matrix with eigenvalues log-spaced in [1, condition]."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    eig = np.logspace(0.0, np.log10(condition), n) if n > 1 else np.array([1.0])
    h = (q * eig) @ q.T
    return 0.5 * (h + h.T)


def make_quadratic(h, g, c: float = 0.0, bounds: Optional[Bounds] = None, name: str = "quadratic",
                   **params) -> ObjectiveSpec:
    """f(x) = c + g.x + x.H.x / 2 with its analytic gradient and minimizer."""
    h = np.array(h, dtype=float)
    g = np.array(g, dtype=float)
    n = g.size
    if bounds is None:
        bounds = Bounds.uniform(-10.0, 10.0, n)
    x_star = np.linalg.solve(h, -g)
    f_star = float(c + g @ x_star + 0.5 * x_star @ h @ x_star)
    h.flags.writeable = False
    g.flags.writeable = False
    return ObjectiveSpec(
        name=name,
        dimension=n,
        bounds=bounds,
        evaluate=lambda x: float(c + g @ x + 0.5 * (x @ h @ x)),
        analytic_gradient=lambda x: g + h @ x,
        known_minimum=(x_star, f_star),
        params=dict(hessian=h, linear=g, constant=float(c), **params),
    )


def make_benchmark(name: str, n: int, seed: int = 0, simulated_cost: float = 1.0) -> ObjectiveSpec:
    """Build one of the benchmark objectives in dimension ``n``.

    ``quadratic_spd`` draws its Hessian (condition number 1e3), minimizer and
    constant from ``seed``; the other objectives ignore the seed.
    """
    n = int(n)
    if n < 1:
        raise ValueError("dimension must be positive")
    if name == "sphere":
        spec = ObjectiveSpec("sphere", n, Bounds.uniform(-10, 10, n), _sphere,
                             analytic_gradient=lambda x: 2.0 * x,
                             known_minimum=(np.zeros(n), 0.0))
    elif name == "quadratic_spd":
        rng = make_rng(seed)
        h = random_spd(n, rng, condition=1e3)
        x_target = rng.uniform(-1.0, 1.0, n)
        c = float(rng.uniform(-1.0, 1.0))
        spec = make_quadratic(h, -h @ x_target, c, name="quadratic_spd", seed=seed)
    elif name == "rosenbrock":
        if n < 2:
            raise DimensionError("rosenbrock needs n >= 2")
        spec = ObjectiveSpec("rosenbrock", n, Bounds.uniform(-5, 5, n), _rosenbrock,
                             analytic_gradient=_rosenbrock_grad,
                             known_minimum=(np.ones(n), 0.0))
    elif name == "rastrigin":
        spec = ObjectiveSpec("rastrigin", n, Bounds.uniform(-5.12, 5.12, n), _rastrigin,
                             analytic_gradient=lambda x: 2.0 * x + 20.0 * np.pi * np.sin(2.0 * np.pi * x),
                             known_minimum=(np.zeros(n), 0.0))
    elif name == "double_well":
        if n != 1:
            raise DimensionError("double_well is one-dimensional")
        # critical points solve 4x^3 - 4x + 0.2 = 0; the deep well is the negative root
        roots = np.sort(np.roots([4.0, 0.0, -4.0, 0.2]).real)
        x_deep = np.array([roots[0]])
        spec = ObjectiveSpec("double_well", 1, Bounds.uniform(-2, 2, 1), _double_well,
                             analytic_gradient=lambda x: 4.0 * x ** 3 - 4.0 * x + 0.2,
                             known_minimum=(x_deep, _double_well(x_deep)),
                             params={"shallow_minimum": float(roots[2]), "barrier": float(roots[1])})
    else:
        raise ValueError(f"unknown objective {name!r}; choose from {', '.join(BENCHMARKS)}")
    if simulated_cost != 1.0:
        spec = replace(spec, simulated_cost=float(simulated_cost))
    return spec


def validate_points(points: Sequence, n: int) -> np.ndarray:
    """Stack points into an (m, n) array, checking dimension and finiteness."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise DimensionError(f"expected an (m, {n}) array of points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    return arr
