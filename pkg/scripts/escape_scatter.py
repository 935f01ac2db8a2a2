"""Line-search samples on the double well, for a fitness-vs-position scatter.

The run starts in the shallow well; the first line search spans both wells
and usually moves the center into the deep one.
"""
import argparse
import csv
import sys

from asyncnewton.anm import LINE_SEARCHING, ANMConfig, ANMDriver
from asyncnewton.core import EvaluationRecord, make_benchmark


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--start", type=float, default=1.0)
    args = p.parse_args(argv)

    f = make_benchmark("double_well", 1)
    cfg = ANMConfig(m_regress=20, m_line=args.samples, alpha_range=(-1000.0, 1000.0),
                    max_iterations=4, rng_seed=args.seed)
    drv = ANMDriver(f, cfg, start=[args.start])
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["iteration", "x", "fitness"])
    while not drv.terminal:
        tag = drv.tag
        records = [EvaluationRecord(x, f(x), "oracle", tag) for x in drv.plan_batch(drv.results_needed)]
        if tag[1] == LINE_SEARCHING:
            for r in records:
                w.writerow([tag[0] + 1, repr(float(r.point[0])), repr(r.fitness)])
        drv.accept_results(records)
    for r in drv.trace.rows:
        print(f"# iteration {r.iteration}: center {r.center[0]:+.6f} fitness {r.best_fitness:+.6f}",
              file=sys.stderr)


if __name__ == "__main__":
    main()
