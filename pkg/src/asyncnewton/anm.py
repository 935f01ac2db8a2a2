"""Asynchronous Newton method driver.

The driver alternates two phases. In the regression phase it hands out
random points in the step box around the current center and, once enough
results are in, fits a quadratic surrogate to get a Newton direction. In the
line-search phase it hands out random points along that direction and moves
the center to the best one. Points are planned on demand and results may
arrive in any order from any backend; every result carries the tag of the
phase it was planned for and results with a stale tag are ignored.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Protocol, Sequence

import numpy as np

from .core import EvaluationRecord, ObjectiveSpec, as_point, as_steps, contains, make_rng, sample_box
from .finite_diff import newton_direction
from .line_search import (
    DEFAULT_ALPHA_RANGE, AlphaInterval, EmptyIntervalError, LineSpec, clip_alpha, sample_line,
    select_best,
)
from .surrogate import QuadraticModel, RankDeficientError, n_columns, regress_model
from .trace import Trace, TraceRow, convergence_status

log = logging.getLogger(__name__)

REGRESSING = "regressing"
LINE_SEARCHING = "line_searching"
CONVERGED = "converged"
FAILED = "failed"
TERMINAL = (CONVERGED, FAILED)


@dataclass
class ANMConfig:
    """Driver settings. ``m_regress`` defaults to twice the surrogate column count
    and ``m_line`` to ``m_regress``."""

    m_regress: Optional[int] = None
    m_line: Optional[int] = None
    step: Any = 0.1
    alpha_range: tuple = DEFAULT_ALPHA_RANGE
    epsilon_rel: float = 1e-8
    stall_iterations: int = 3
    max_iterations: int = 100
    rng_seed: int = 0
    start: Optional[Sequence[float]] = None

    def resolved(self, n: int) -> "ANMConfig":
        cols = n_columns(n)
        m_regress = 2 * cols if self.m_regress is None else int(self.m_regress)
        m_line = m_regress if self.m_line is None else int(self.m_line)
        if m_regress < cols:
            raise ValueError(f"m_regress={m_regress} is below the {cols} surrogate coefficients for n={n}")
        if m_line < 1:
            raise ValueError("m_line must be positive")
        lo, hi = map(float, self.alpha_range)
        if not lo < hi:
            raise ValueError("alpha_range must be increasing")
        if self.epsilon_rel < 0 or self.stall_iterations < 1 or self.max_iterations < 0:
            raise ValueError("invalid convergence settings")
        return ANMConfig(m_regress, m_line, as_steps(self.step, n), (lo, hi), float(self.epsilon_rel),
                         int(self.stall_iterations), int(self.max_iterations), int(self.rng_seed),
                         self.start)


@dataclass
class SearchState:
    phase: str
    iteration: int
    center: np.ndarray
    center_fitness: float
    model: Optional[QuadraticModel] = None
    line: Optional[LineSpec] = None
    interval: Optional[AlphaInterval] = None
    pending_results: list = field(default_factory=list)
    # best fitness before iteration 1 and after every iteration
    history: list = field(default_factory=list)
    cumulative_evals: int = 0
    regression_evals: int = 0
    extra_required: int = 0
    ignored: int = 0
    direction_fallbacks: int = 0


class ANMDriver:
    """Single-owner state machine; backends call :meth:`plan_batch` and :meth:`accept_results`."""

    def __init__(self, objective: ObjectiveSpec, config: ANMConfig, start=None):
        n = objective.dimension
        self.objective = objective
        self.config = config.resolved(n)
        if start is None:
            start = config.start if config.start is not None else objective.bounds.center
        center = as_point(start, n)
        if not contains(objective.bounds, center):
            raise ValueError(f"start point {center} is outside the bounds")
        self.rng = make_rng(self.config.rng_seed)
        # the start point is never evaluated; the first line search always moves the center
        self.state = SearchState(REGRESSING, 0, center, float("inf"), history=[float("inf")])
        self.trace = Trace(objective.name, n, "anm", max(self.config.m_regress, self.config.m_line),
                           objective.f_star, status=REGRESSING)
        if self.config.max_iterations == 0:
            self._finish(FAILED)

    @property
    def phase(self) -> str:
        return self.state.phase

    @property
    def terminal(self) -> bool:
        return self.state.phase in TERMINAL

    @property
    def tag(self) -> Optional[tuple]:
        return None if self.terminal else (self.state.iteration, self.state.phase)

    @property
    def required(self) -> int:
        if self.state.phase == REGRESSING:
            return self.config.m_regress + self.state.extra_required
        if self.state.phase == LINE_SEARCHING:
            return self.config.m_line
        return 0

    @property
    def results_needed(self) -> int:
        return max(self.required - len(self.state.pending_results), 0)

    def plan_batch(self, count: int) -> list[np.ndarray]:
        st = self.state
        if st.phase == REGRESSING:
            return [sample_box(st.center, self.config.step, self.objective.bounds, self.rng)
                    for _ in range(count)]
        if st.phase == LINE_SEARCHING:
            return [sample_line(st.line, st.interval, self.rng.random()) for _ in range(count)]
        raise RuntimeError(f"cannot plan work in terminal phase {st.phase!r}")

    def accept_results(self, validated: Sequence[EvaluationRecord]) -> int:
        """Queue results for the current phase; returns how many were taken.

        The phase completes as soon as the required count is reached; every
        matching result delivered in the same call is used.
        """
        if self.terminal:
            self.state.ignored += len(validated)
            return 0
        tag = self.tag
        fresh = [r for r in validated if r.tag == tag]
        stale = len(validated) - len(fresh)
        if stale:
            self.state.ignored += stale
            log.debug("ignored %d results with stale tags", stale)
        self.state.pending_results.extend(fresh)
        if len(self.state.pending_results) >= self.required:
            if self.state.phase == REGRESSING:
                self._finish_regression()
            else:
                self._finish_line_search()
        return len(fresh)

    def fail(self, reason: str = "") -> None:
        if not self.terminal:
            log.info("ANM run failed: %s", reason)
            self._finish(FAILED)

    def _finish(self, phase: str) -> None:
        self.state.phase = phase
        self.state.pending_results = []
        self.trace.status = phase

    def _finish_regression(self) -> None:
        st = self.state
        # canonical row order makes the fit independent of arrival order
        results = sorted(st.pending_results, key=lambda r: tuple(r.point))
        try:
            model = regress_model(st.center, results)
        except RankDeficientError as err:
            # stay in this phase and wait for more points
            st.extra_required += n_columns(self.objective.dimension)
            log.info("%s; requesting %d more results", err, self.results_needed)
            return
        st.regression_evals = len(st.pending_results)
        st.cumulative_evals += st.regression_evals
        st.model = model
        step = newton_direction(model.gradient, model.hessian)
        st.direction_fallbacks += step.fallback
        d = step.direction
        if not np.any(d):
            d = -model.gradient
        if not np.any(d):
            d = self.config.step * self.rng.choice([-1.0, 1.0], size=d.size)
        lo, hi = self.config.alpha_range
        try:
            line = LineSpec(st.center, d, lo, hi)
            interval = clip_alpha(line, self.objective.bounds)
        except EmptyIntervalError:
            line = LineSpec(st.center, d, min(lo, 0.0), max(hi, 0.0))
            interval = clip_alpha(line, self.objective.bounds)
        st.line, st.interval = line, interval
        st.pending_results = []
        st.phase = LINE_SEARCHING
        self.trace.status = LINE_SEARCHING

    def _finish_line_search(self) -> None:
        st = self.state
        results = st.pending_results
        best = select_best(results)
        st.iteration += 1
        st.cumulative_evals += len(results)
        for rec in results:
            self.trace.line_samples.append((st.iteration, st.line.alpha_of(rec.point), float(rec.fitness)))
        if best.fitness < st.center_fitness:
            st.center = np.array(best.point, dtype=float)
            st.center_fitness = float(best.fitness)
        st.history.append(st.center_fitness)
        status = convergence_status(st.history, st.iteration, self.config.epsilon_rel,
                                    self.config.stall_iterations, self.config.max_iterations)
        phase = {"continue": REGRESSING, "converged": CONVERGED, "failed": FAILED}[status]
        self.trace.rows.append(TraceRow(
            iteration=st.iteration,
            phase=phase,
            best_fitness=st.center_fitness,
            # fsum is exactly rounded, so the average does not depend on arrival order
            avg_fitness=math.fsum(r.fitness for r in results) / len(results),
            cumulative_evals=st.cumulative_evals,
            center=tuple(float(v) for v in st.center),
            stencil_evals=st.regression_evals,
            line_best=float(best.fitness),
        ))
        st.pending_results = []
        st.extra_required = 0
        st.line = st.interval = None
        if phase in TERMINAL:
            self._finish(phase)
        else:
            st.phase = REGRESSING
            self.trace.status = REGRESSING


class Backend(Protocol):
    def drive(self, driver: ANMDriver) -> None: ...


class DirectBackend:
    """In-process evaluation of exactly the points each phase still needs.

    ``shuffle_seed`` permutes each delivered batch to exercise arrival-order
    independence.
    """

    def __init__(self, shuffle_seed: Optional[int] = None):
        self.shuffle_seed = shuffle_seed

    def drive(self, driver: ANMDriver) -> None:
        f = driver.objective
        shuffle = None if self.shuffle_seed is None else make_rng(self.shuffle_seed)
        while not driver.terminal:
            tag = driver.tag
            points = driver.plan_batch(driver.results_needed)
            records = [EvaluationRecord(p, f(p), "oracle", tag) for p in points]
            if shuffle is not None:
                records = [records[i] for i in shuffle.permutation(len(records))]
            driver.accept_results(records)


def run_anm(objective: ObjectiveSpec, config: ANMConfig, backend: Optional[Backend] = None,
            start=None) -> Trace:
    driver = ANMDriver(objective, config, start)
    (backend or DirectBackend()).drive(driver)
    return driver.trace
