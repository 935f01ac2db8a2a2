"""Synchronous comparison optimizers: nonlinear CG and finite-difference Newton."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .core import ObjectiveSpec, as_point, as_steps, contains
from .finite_diff import EvalCache, fd_gradient, fd_hessian, newton_direction
from .line_search import BacktrackResult, backtracking_search
from .trace import Trace, TraceRow, convergence_status

# (objective, x, d, fx, slope) -> BacktrackResult
LineSearch = Callable[[ObjectiveSpec, np.ndarray, np.ndarray, float, float], BacktrackResult]


@dataclass
class BaselineConfig:
    step: Any = 1e-4
    max_iterations: int = 1000
    epsilon_rel: float = 1e-8
    stall_iterations: int = 3
    # CG restart period; None means the problem dimension
    restart_interval: Optional[int] = None


def _backtrack(f, x, d, fx, slope):
    # CG directions carry no natural step length: start from the box face
    return backtracking_search(f, x, d, fx=fx, slope=slope, alpha_max=np.inf)


def _stencil_step(f: ObjectiveSpec, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    # shrink steps near the faces so every stencil point stays in the box
    room = np.minimum(x - f.bounds.lower, f.bounds.upper - x)
    shrunk = np.minimum(s, 0.5 * room)
    return np.where(shrunk > 0, shrunk, s)


def _start(f: ObjectiveSpec, start) -> np.ndarray:
    x = as_point(f.bounds.center if start is None else start, f.dimension)
    if not contains(f.bounds, x):
        raise ValueError(f"start point {x} is outside the bounds")
    return x


def run_cgd(objective: ObjectiveSpec, start=None, config: Optional[BaselineConfig] = None,
            line_search: LineSearch = _backtrack) -> Trace:
    """Polak-Ribiere conjugate gradients on central-difference gradients.

    ``line_search`` can be swapped (e.g. for an exact minimizer in tests).
    """
    config = config or BaselineConfig()
    f = objective
    n = f.dimension
    s = as_steps(config.step, n)
    restart = config.restart_interval or n
    trace = Trace(f.name, n, "cgd", 2 * n, f.f_star)
    x = _start(f, start)
    fx = f(x)
    evals = 1
    history = [fx]
    g_prev = d = None
    since_restart = 0
    for it in range(1, config.max_iterations + 1):
        cache = EvalCache()
        g = fd_gradient(f, x, _stencil_step(f, x, s), cache)
        stencil = cache.count
        if d is None or since_restart >= restart:
            d = -g
            since_restart = 0
        else:
            beta = max(0.0, g @ (g - g_prev) / (g_prev @ g_prev)) if np.any(g_prev) else 0.0
            d = -g + beta * d
            if g @ d >= 0:
                d = -g
                since_restart = 0
        since_restart += 1
        step = line_search(f, x, d, fx, float(g @ d))
        evals += stencil + step.evaluations
        x, fx = step.point, step.fitness
        g_prev = g
        history.append(fx)
        status = convergence_status(history, it, config.epsilon_rel, config.stall_iterations,
                                    config.max_iterations)
        trace.rows.append(TraceRow(it, "running" if status == "continue" else status, fx, fx, evals,
                                   tuple(map(float, x)), stencil_evals=stencil))
        if status != "continue":
            trace.status = status
            break
    else:
        trace.status = "failed"
    return trace


def run_sync_newton(objective: ObjectiveSpec, start=None, config: Optional[BaselineConfig] = None) -> Trace:
    """Newton iterations on the finite-difference gradient and Hessian."""
    config = config or BaselineConfig()
    f = objective
    n = f.dimension
    s = as_steps(config.step, n)
    trace = Trace(f.name, n, "newton", 2 * n * n + 2 * n + 1, f.f_star)
    x = _start(f, start)
    fx = f(x)
    evals = 1
    history = [fx]
    for it in range(1, config.max_iterations + 1):
        cache = EvalCache()
        # the Hessian stencil reaches x +- 2 s_i
        h_step = _stencil_step(f, x, 2 * s) / 2
        g = fd_gradient(f, x, h_step, cache)
        h = fd_hessian(f, x, h_step, cache)
        stencil = cache.count
        d = newton_direction(g, h).direction
        if g @ d >= 0:
            d = -g
        step = backtracking_search(f, x, d, fx=fx, slope=float(g @ d))
        evals += stencil + step.evaluations
        x, fx = step.point, step.fitness
        history.append(fx)
        status = convergence_status(history, it, config.epsilon_rel, config.stall_iterations,
                                    config.max_iterations)
        trace.rows.append(TraceRow(it, "running" if status == "continue" else status, fx, fx, evals,
                                   tuple(map(float, x)), stencil_evals=stencil))
        if status != "continue":
            trace.status = status
            break
    else:
        trace.status = "failed"
    return trace


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    iterations_to_threshold: Optional[int]
    evals_to_threshold: Optional[int]
    max_concurrency: int
    iteration_ratio: Optional[float]


@dataclass(frozen=True)
class ComparisonReport:
    objective: str
    dimension: int
    threshold: float
    rows: tuple

    def row(self, name: str) -> ComparisonRow:
        return next(r for r in self.rows if r.name == name)


def compare(traces: Sequence[tuple[str, Trace]], threshold: float = 1e-6) -> ComparisonReport:
    """Iterations and evaluations needed to bring f - f* under ``threshold``.

    ``iteration_ratio`` is relative to the first trace.
    """
    if len(traces) < 2:
        raise ValueError("compare needs at least two traces")
    first = traces[0][1]
    for name, t in traces:
        if (t.objective, t.dimension) != (first.objective, first.dimension):
            raise ValueError(f"trace {name!r} is on {t.objective}/{t.dimension}, "
                             f"expected {first.objective}/{first.dimension}")
    ref = first.iterations_to(threshold)
    rows = []
    for name, t in traces:
        its = t.iterations_to(threshold)
        ratio = its / ref if its is not None and ref else None
        rows.append(ComparisonRow(name, its, t.evals_to(threshold), t.concurrency, ratio))
    return ComparisonReport(first.objective, first.dimension, threshold, tuple(rows))
