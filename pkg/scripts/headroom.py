"""How much of BS's makespan is still memory stall, per grid point.

A perfect memory system would leave only issue and compute cycles
(sum of 1 + gap + post).  The fraction of BS makespan above that bound is
the most any runahead policy could still remove.
"""

import argparse
import statistics

import numpy as np

from runahead_sim import CacheConfig, GenParams, Policy, RunaheadConfig
from runahead_sim.fastpath import line_arrays, simulate_arrays
from runahead_sim.harness import default_grid, workload_seed
from runahead_sim.workload import generate_arrays


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--workloads", type=int, default=10)
    ap.add_argument("-n", type=int, default=100_000)
    args = ap.parse_args()
    rc = RunaheadConfig()
    points = list(dict.fromkeys(p for s in default_grid() for p in s.points()))
    print("   D  I  S1  headroom  adaptive-gain")
    for d, i, s1 in points:
        cfg = CacheConfig(s1=s1)
        room, gain = [], []
        for w in range(args.workloads):
            seed = workload_seed(0, (d, i, s1), w)
            raw = generate_arrays(GenParams(data_size_kb=d, max_gap_insns=i, n_accesses=args.n, seed=seed))
            floor = int(np.sum(1 + raw[2] + raw[3]))
            arrays = line_arrays(*raw, cfg)
            bs = simulate_arrays(arrays, cfg, Policy.BS, rc).makespan
            ad = simulate_arrays(arrays, cfg, Policy.ADAPTIVE, rc).makespan
            room.append(1 - floor / bs)
            gain.append(1 - ad / bs)
        print(f"{d:>4} {i:>2} {s1:>3}  {statistics.fmean(room):>8.1%}  {statistics.fmean(gain):>12.2%}")


if __name__ == "__main__":
    main()
