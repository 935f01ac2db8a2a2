"""Per-iteration optimization history shared by ANM and the baselines."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    phase: str
    best_fitness: float
    avg_fitness: float
    cumulative_evals: int
    center: tuple
    # evaluations spent estimating derivatives this iteration
    stencil_evals: int = 0
    # lowest fitness seen in this iteration's line search (may exceed best_fitness)
    line_best: float = float("nan")


@dataclass
class Trace:
    objective: str
    dimension: int
    algorithm: str
    concurrency: int
    f_star: Optional[float] = None
    status: str = "running"
    rows: list = field(default_factory=list)
    # (iteration, alpha, fitness) for every line-search evaluation
    line_samples: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def iterations(self) -> int:
        return len(self.rows)

    @property
    def best_fitness(self) -> np.ndarray:
        return np.array([r.best_fitness for r in self.rows])

    @property
    def final_fitness(self) -> float:
        return self.rows[-1].best_fitness if self.rows else float("nan")

    @property
    def final_center(self) -> np.ndarray:
        return np.array(self.rows[-1].center) if self.rows else np.array([])

    def gap(self) -> np.ndarray:
        """Best fitness minus the known minimum (raw fitness when it is unknown)."""
        f_star = 0.0 if self.f_star is None else self.f_star
        return self.best_fitness - f_star

    def iterations_to(self, threshold: float) -> Optional[int]:
        hit = np.flatnonzero(self.gap() <= threshold)
        return int(self.rows[hit[0]].iteration) if hit.size else None

    def evals_to(self, threshold: float) -> Optional[int]:
        hit = np.flatnonzero(self.gap() <= threshold)
        return int(self.rows[hit[0]].cumulative_evals) if hit.size else None

    def same_as(self, other: "Trace") -> bool:
        """Bit-identical comparison of rows, samples and status."""
        def key(t):
            return (t.status, [tuple(map(repr, r.__dict__.values())) for r in t.rows],
                    [tuple(map(repr, s)) for s in t.line_samples])
        return key(self) == key(other)


def relative_improvement(prev: float, cur: float) -> float:
    """Improvement of ``cur`` over ``prev`` relative to ``max(|prev|, 1)``."""
    if not np.isfinite(prev):
        return float("inf")
    return (prev - cur) / max(abs(prev), 1.0)


def convergence_status(history, iteration: int, epsilon_rel: float, stall_iterations: int,
                       max_iterations: int) -> str:
    """``"continue"``, ``"converged"`` or ``"failed"`` from the best-fitness history.

    ``history`` holds the best fitness before the first iteration followed by
    the best fitness after each completed iteration.
    """
    if len(history) > stall_iterations:
        recent = [relative_improvement(history[i - 1], history[i])
                  for i in range(len(history) - stall_iterations, len(history))]
        if all(r < epsilon_rel for r in recent):
            return "converged"
    if iteration >= max_iterations:
        return "failed"
    return "continue"
