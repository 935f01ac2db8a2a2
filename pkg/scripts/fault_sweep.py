"""Grid cost of unreliable and malicious workers on the 4-d sphere."""
import argparse

import numpy as np

from asyncnewton.anm import ANMConfig
from asyncnewton.core import fork_rng, make_benchmark
from asyncnewton.grid_sim import GridConfig, run_simulation


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--workers", type=int, default=200)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--validation", default="lazy", choices=["none", "lazy", "full"])
    args = p.parse_args(argv)

    f = make_benchmark("sphere", 4)
    print(f"{'p_fail':>6} {'p_mal':>6} {'makespan':>9} {'issued':>7} {'wasted':>7} "
          f"{'expired':>7} {'bad used':>8} {'final gap':>10}")
    for p_fail in (0.0, 0.3, 0.6):
        for p_mal in (0.0, 0.1, 0.2):
            rows = []
            for seed in range(args.seeds):
                grid = GridConfig(num_workers=args.workers, validation=args.validation, p_fail=p_fail,
                                  p_malicious=p_mal, rng_seed=seed, record_events=False)
                trace, s = run_simulation(f, ANMConfig(rng_seed=seed), grid,
                                          start=fork_rng(seed, 5).uniform(-5, 5, 4))
                rows.append((s.makespan, s.issued, s.wasted_evaluations, s.expired,
                             s.consumed_corrupted, trace.final_fitness))
            m = np.mean(rows, axis=0)
            print(f"{p_fail:>6.1f} {p_mal:>6.1f} {m[0]:>9.1f} {m[1]:>7.0f} {m[2]:>7.0f} {m[3]:>7.0f} "
                  f"{int(sum(r[4] for r in rows)):>8d} {max(r[5] for r in rows):>10.2e}")


if __name__ == "__main__":
    main()
