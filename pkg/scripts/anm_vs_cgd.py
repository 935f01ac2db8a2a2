"""Iterations to reach f - f* <= threshold: ANM against CGD and FD Newton over seeds."""
import argparse

import numpy as np

from asyncnewton.anm import ANMConfig, run_anm
from asyncnewton.baselines import BaselineConfig, compare, run_cgd, run_sync_newton
from asyncnewton.core import fork_rng, make_benchmark


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--dimension", type=int, default=8)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--m", type=int, default=200, help="regression and line-search results per iteration")
    p.add_argument("--threshold", type=float, default=1e-6)
    args = p.parse_args(argv)

    n = args.dimension
    print(f"{'seed':>4} {'anm':>5} {'cgd':>5} {'newton':>6} {'cgd/anm':>8} {'anm evals':>10} {'cgd evals':>10}")
    ratios = []
    for seed in range(args.seeds):
        f = make_benchmark("quadratic_spd", n, seed=seed)
        start = fork_rng(seed, 0).uniform(-5, 5, n)
        traces = [
            ("anm", run_anm(f, ANMConfig(m_regress=args.m, m_line=args.m, epsilon_rel=0.0,
                                         max_iterations=20, rng_seed=seed), start=start)),
            ("cgd", run_cgd(f, start, BaselineConfig(epsilon_rel=0.0, max_iterations=3000))),
            ("newton", run_sync_newton(f, start, BaselineConfig(step=0.1, epsilon_rel=0.0,
                                                                max_iterations=20))),
        ]
        rep = compare(traces, args.threshold)
        a, c, nw = rep.row("anm"), rep.row("cgd"), rep.row("newton")
        ratio = c.iteration_ratio
        ratios.append(np.nan if ratio is None else ratio)
        print(f"{seed:>4} {a.iterations_to_threshold!s:>5} {c.iterations_to_threshold!s:>5} "
              f"{nw.iterations_to_threshold!s:>6} {ratio or float('nan'):>8.1f} "
              f"{a.evals_to_threshold!s:>10} {c.evals_to_threshold!s:>10}")
    print(f"median CGD/ANM iteration ratio: {np.nanmedian(ratios):.1f}")
    print(f"concurrency per iteration: anm {args.m}, cgd {2 * n}, newton {2 * n * n + 2 * n + 1}")


if __name__ == "__main__":
    main()
