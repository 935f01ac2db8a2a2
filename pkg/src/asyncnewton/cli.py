"""Experiment runner.

Subcommands::

    asyncnewton run CONFIG [--seed N] [--output-dir DIR] [--max-virtual-time T]
    asyncnewton compare TRACE_CSV TRACE_CSV ... [--seed N] [--output-dir DIR]
    asyncnewton list-objectives
    asyncnewton defaults

Exit status is 0 on success, 2 for a bad config or incompatible inputs and
1 when an experiment fails at run time.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .anm import ANMConfig, run_anm
from .baselines import BaselineConfig, compare, run_cgd, run_sync_newton
from .core import BENCHMARKS, DimensionError, fork_rng, make_benchmark
from .grid_sim import GridBackend, GridConfig
from .trace import Trace, TraceRow

log = logging.getLogger("asyncnewton")

ALGORITHMS = ("anm", "cgd", "newton")
BACKENDS = ("direct", "grid")
TOP_KEYS = {"objective", "algorithm", "backend", "seeds", "output_dir", "anm", "baseline", "grid",
            "threshold"}
OBJECTIVE_KEYS = {"name", "dimension", "seed", "start", "simulated_cost"}
REPORT_HEADER = ["seed", "algorithm", "iterations_to_threshold", "evals_to_threshold",
                 "max_concurrency", "iteration_ratio"]


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class ExperimentConfig:
    objective: dict
    algorithms: list
    backend: str = "direct"
    seeds: list = dataclasses.field(default_factory=lambda: [0])
    output_dir: str = "results"
    threshold: float = 1e-6
    anm: dict = dataclasses.field(default_factory=dict)
    baseline: dict = dataclasses.field(default_factory=dict)
    grid: dict = dataclasses.field(default_factory=dict)


def _check_section(raw, cls, name: str) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping")
    allowed = {f.name for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"{name}.{key}: unknown key")
    return dict(raw)


def parse_config(raw) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    for key in raw:
        if key not in TOP_KEYS:
            raise ConfigError(f"{key}: unknown key")
    if "objective" not in raw:
        raise ConfigError("objective: missing required key")
    obj = raw["objective"]
    if not isinstance(obj, dict):
        raise ConfigError("objective: expected a mapping")
    for key in obj:
        if key not in OBJECTIVE_KEYS:
            raise ConfigError(f"objective.{key}: unknown key")
    for key in ("name", "dimension"):
        if key not in obj:
            raise ConfigError(f"objective.{key}: missing required key")
    if obj["name"] not in BENCHMARKS:
        raise ConfigError(f"objective.name: unknown objective {obj['name']!r}")
    algorithms = raw.get("algorithm", "anm")
    algorithms = [algorithms] if isinstance(algorithms, str) else list(algorithms)
    if not algorithms or any(a not in ALGORITHMS for a in algorithms):
        raise ConfigError(f"algorithm: expected one or more of {ALGORITHMS}")
    backend = raw.get("backend", "direct")
    if backend not in BACKENDS:
        raise ConfigError(f"backend: expected one of {BACKENDS}")
    seeds = raw.get("seeds", [0])
    seeds = [seeds] if isinstance(seeds, int) else list(seeds)
    if not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds: expected a list of integers")
    grid = _check_section(raw.get("grid"), GridConfig, "grid")
    if backend == "grid" and "anm" in algorithms and raw.get("grid") is None:
        raise ConfigError("grid: section required for the grid backend")
    return ExperimentConfig(
        objective=dict(obj),
        algorithms=algorithms,
        backend=backend,
        seeds=seeds,
        output_dir=str(raw.get("output_dir", "results")),
        threshold=float(raw.get("threshold", 1e-6)),
        anm=_check_section(raw.get("anm"), ANMConfig, "anm"),
        baseline=_check_section(raw.get("baseline"), BaselineConfig, "baseline"),
        grid=grid,
    )


def _fmt(v) -> str:
    return "" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _start_point(cfg: ExperimentConfig, objective, seed: int) -> np.ndarray:
    if cfg.objective.get("start") is not None:
        return np.asarray(cfg.objective["start"], dtype=float)
    b = objective.bounds
    return fork_rng(seed, 3).uniform(b.lower, b.upper)


def run_one(cfg: ExperimentConfig, algorithm: str, seed: int, max_virtual_time=None):
    """Run one algorithm for one seed; returns ``(trace, grid_stats_or_None)``."""
    o = cfg.objective
    objective = make_benchmark(o["name"], o["dimension"], seed=o.get("seed", 0),
                               simulated_cost=o.get("simulated_cost", 1.0))
    start = _start_point(cfg, objective, seed)
    if algorithm == "anm":
        anm = ANMConfig(**{**cfg.anm, "rng_seed": seed})
        if cfg.backend == "grid":
            grid_kw = {**cfg.grid, "rng_seed": seed}
            if max_virtual_time is not None:
                grid_kw["max_virtual_time"] = max_virtual_time
            backend = GridBackend(GridConfig(**grid_kw))
            return run_anm(objective, anm, backend, start), backend.stats
        return run_anm(objective, anm, start=start), None
    base = BaselineConfig(**cfg.baseline)
    if algorithm == "cgd":
        return run_cgd(objective, start, base), None
    return run_sync_newton(objective, start, base), None


def trace_header(n: int) -> list[str]:
    return ["seed", "iteration", "phase", "best_fitness", "avg_fitness", "cumulative_evals"] + \
        [f"x{i}" for i in range(n)]


def write_outputs(out: Path, runs: list, backend: str) -> None:
    """Write trace.csv, linesearch.csv, events.jsonl and meta.json for one algorithm."""
    out.mkdir(parents=True, exist_ok=True)
    first: Trace = runs[0][1]
    with open(out / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(first.dimension))
        for seed, t, _ in runs:
            for r in t.rows:
                w.writerow([seed, r.iteration, r.phase, _fmt(r.best_fitness), _fmt(r.avg_fitness),
                            r.cumulative_evals, *map(_fmt, r.center)])
    if first.algorithm == "anm":
        with open(out / "linesearch.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "iteration", "alpha", "fitness"])
            for seed, t, _ in runs:
                for it, alpha, fit in t.line_samples:
                    w.writerow([seed, it, _fmt(alpha), _fmt(fit)])
    if backend == "grid" and first.algorithm == "anm":
        with open(out / "events.jsonl", "w") as fh:
            for seed, _, stats in runs:
                for e in stats.events:
                    fh.write(json.dumps({"seed": seed, **e}, sort_keys=True) + "\n")
    meta = {
        "objective": first.objective,
        "dimension": first.dimension,
        "algorithm": first.algorithm,
        "concurrency": first.concurrency,
        "f_star": first.f_star,
        "status": {str(seed): t.status for seed, t, _ in runs},
    }
    if backend == "grid" and first.algorithm == "anm":
        meta["grid"] = {str(seed): {k: v for k, v in s.summary().items() if k != "per_worker"}
                        for seed, _, s in runs}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def write_report(path: Path, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for seed, r in rows:
            w.writerow([seed, r.name, _fmt(r.iterations_to_threshold), _fmt(r.evals_to_threshold),
                        r.max_concurrency, _fmt(r.iteration_ratio)])


def cmd_run(args) -> int:
    try:
        raw = yaml.safe_load(Path(args.config).read_text())
        cfg = parse_config(raw)
    except (OSError, yaml.YAMLError, ConfigError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seeds = [args.seed]
    out = Path(args.output_dir or cfg.output_dir)
    try:
        results = {a: [(seed, *run_one(cfg, a, seed, args.max_virtual_time)) for seed in cfg.seeds]
                   for a in cfg.algorithms}
    except (DimensionError, ValueError, TypeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001
        log.exception("experiment failed")
        print(f"runtime failure: {err}", file=sys.stderr)
        return 1
    multi = len(cfg.algorithms) > 1
    for a, runs in results.items():
        write_outputs(out / a if multi else out, runs, cfg.backend)
    if multi:
        rows = []
        for i, seed in enumerate(cfg.seeds):
            report = compare([(a, results[a][i][1]) for a in cfg.algorithms], cfg.threshold)
            rows.extend((seed, r) for r in report.rows)
        write_report(out / "report.csv", rows)
    for a, runs in results.items():
        for seed, t, _ in runs:
            print(f"{a} seed={seed} status={t.status} iterations={t.iterations} "
                  f"best={t.final_fitness!r}")
    return 0


def load_trace(path, seed: Optional[int] = None) -> tuple[Trace, int]:
    """Rebuild one seed's Trace from a trace.csv and its sibling meta.json."""
    path = Path(path)
    meta = json.loads((path.parent / "meta.json").read_text())
    n = meta["dimension"]
    rows: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != trace_header(n):
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for rec in reader:
            rows.setdefault(int(rec["seed"]), []).append(TraceRow(
                iteration=int(rec["iteration"]), phase=rec["phase"],
                best_fitness=float(rec["best_fitness"]), avg_fitness=float(rec["avg_fitness"]),
                cumulative_evals=int(rec["cumulative_evals"]),
                center=tuple(float(rec[f"x{i}"]) for i in range(n))))
    if seed is None:
        seed = min(rows) if rows else 0
    if seed not in rows and rows:
        raise ValueError(f"{path}: no rows for seed {seed}")
    t = Trace(meta["objective"], n, meta["algorithm"], meta["concurrency"], meta.get("f_star"),
              status=meta.get("status", {}).get(str(seed), "unknown"), rows=rows.get(seed, []))
    return t, seed


def cmd_compare(args) -> int:
    try:
        seed = args.seed
        loaded = []
        for p in args.traces:
            t, s = load_trace(p, seed)
            seed = s if seed is None else seed
            loaded.append((t.algorithm, t))
        report = compare(loaded, args.threshold)
    except (OSError, ValueError, KeyError) as err:
        print(f"compare error: {err}", file=sys.stderr)
        return 2
    out = Path(args.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "report.csv", [(seed, r) for r in report.rows])
    for r in report.rows:
        print(f"{r.name}: iterations={r.iterations_to_threshold} evals={r.evals_to_threshold} "
              f"concurrency={r.max_concurrency} ratio={r.iteration_ratio}")
    return 0


def cmd_list(args) -> int:
    for name in BENCHMARKS:
        f = make_benchmark(name, 1 if name == "double_well" else 2)
        dims = "n = 1" if name == "double_well" else "n >= 2" if name == "rosenbrock" else "n >= 1"
        print(f"{name:14s} {dims:7s} bounds [{f.bounds.lower[0]:g}, {f.bounds.upper[0]:g}]")
    return 0


def default_config() -> dict:
    def plain(dc):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(dc).items()
                if k not in ("rng_seed", "start")}
    return {
        "objective": {"name": "sphere", "dimension": 2, "seed": 0, "start": None, "simulated_cost": 1.0},
        "algorithm": "anm",
        "backend": "direct",
        "seeds": [0],
        "output_dir": "results",
        "threshold": 1e-6,
        "anm": plain(ANMConfig()),
        "baseline": plain(BaselineConfig()),
        "grid": plain(GridConfig()),
    }


def cmd_defaults(args) -> int:
    print("# m_regress: null means 2 x (1 + 2n + n(n-1)/2); m_line: null means m_regress")
    print("# grid.rng_seed and anm.rng_seed are taken from each entry of seeds")
    print(yaml.safe_dump(default_config(), sort_keys=False), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asyncnewton", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--output-dir")
    r.add_argument("--max-virtual-time", type=float)
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("compare", help="tabulate iterations/evaluations to threshold")
    c.add_argument("traces", nargs="+")
    c.add_argument("--seed", type=int)
    c.add_argument("--threshold", type=float, default=1e-6)
    c.add_argument("--output-dir")
    c.set_defaults(func=cmd_compare)
    sub.add_parser("list-objectives", help="list benchmark objectives").set_defaults(func=cmd_list)
    sub.add_parser("defaults", help="print a config with every default").set_defaults(func=cmd_defaults)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
