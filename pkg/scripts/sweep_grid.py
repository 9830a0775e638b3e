"""Run the three one-variable sweeps and print mean makespan per policy.

    python3 scripts/sweep_grid.py --workloads 100 --out results/grid

writes <out>.csv (one row per run) and <out>.plot.json (per-policy series).
"""

import argparse
import statistics
from pathlib import Path

from runahead_sim import Policy
from runahead_sim.harness import default_grid, emit, improvement, run_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--workloads", type=int, default=100)
    ap.add_argument("-n", type=int, default=100_000, help="accesses per workload")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/grid")
    args = ap.parse_args()

    specs = default_grid(workloads_per_point=args.workloads, n_accesses=args.n, base_seed=args.seed)
    tables = run_grid(specs, jobs=args.jobs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    emit(tables, "csv", out.with_suffix(".csv"))
    emit(tables, "plotdata", out.with_suffix(".plot.json"))

    for t in tables:
        means = t.mean_makespan()
        print(f"\n{t.variable:>4} " + " ".join(f"{p.value:>12}" for p in Policy))
        for v in sorted({v for v, _ in means}):
            print(f"{v:>4} " + " ".join(f"{means[(v, p.value)]:>12.0f}" for p in Policy))
    for better, base in ((Policy.ADAPTIVE, Policy.BS), (Policy.BS_S, Policy.BS), (Policy.BS, Policy.NONE)):
        imp = improvement(tables, better, base)
        print(f"{better.value} vs {base.value}: mean gain {statistics.fmean(imp.values()):.2%} "
              f"(min {min(imp.values()):.2%}, max {max(imp.values()):.2%})")


if __name__ == "__main__":
    main()
