"""Asynchronous Newton method with a simulated volunteer-computing grid."""
from .anm import ANMConfig, ANMDriver, DirectBackend, run_anm
from .baselines import BaselineConfig, compare, run_cgd, run_sync_newton
from .core import Bounds, EvaluationRecord, ObjectiveSpec, make_benchmark
from .grid_sim import GridConfig, run_simulation
from .trace import Trace

__all__ = [
    "ANMConfig", "ANMDriver", "DirectBackend", "run_anm", "BaselineConfig", "compare", "run_cgd",
    "run_sync_newton", "Bounds", "EvaluationRecord", "ObjectiveSpec", "make_benchmark", "GridConfig",
    "run_simulation", "Trace",
]
