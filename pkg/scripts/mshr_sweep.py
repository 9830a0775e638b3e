"""Mean makespan per policy as the MSHR count varies, at the fixed grid point.

    python3 scripts/mshr_sweep.py --workloads 100 --mshr 1 2 4 8 16
"""

import argparse
import statistics

from runahead_sim import CacheConfig, Policy
from runahead_sim.harness import FIXED_POINT, SweepSpec, run_points


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--workloads", type=int, default=100)
    ap.add_argument("-n", type=int, default=100_000)
    ap.add_argument("--mshr", type=int, nargs="+", default=[1, 2, 4, 8, 16])
    ap.add_argument("--D", type=int, default=FIXED_POINT["D"])
    ap.add_argument("--I", type=int, default=FIXED_POINT["I"])
    ap.add_argument("--S1", type=int, default=FIXED_POINT["S1"])
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    point = (args.D, args.I, args.S1)
    spec = SweepSpec(workloads_per_point=args.workloads, n_accesses=args.n)
    variants = [(CacheConfig(mshr_count=m), list(Policy)) for m in args.mshr]
    rows = run_points([point], spec, jobs=args.jobs, variants=variants)[point]
    print(f"point D={args.D} I={args.I} S1={args.S1}, {args.workloads} workloads")
    print("mshr " + " ".join(f"{p.value:>12}" for p in Policy) + "   episodes/run(bs)")
    for m in args.mshr:
        mine = [r for r in rows if r["mshr_count"] == m]
        means = [statistics.fmean(r["makespan"] for r in mine if r["policy"] == p.value) for p in Policy]
        eps = statistics.fmean(r["episodes"] for r in mine if r["policy"] == "bs")
        print(f"{m:>4} " + " ".join(f"{x:>12.0f}" for x in means) + f"   {eps:.0f}")


if __name__ == "__main__":
    main()
