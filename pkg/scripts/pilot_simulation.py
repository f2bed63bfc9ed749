"""Pilot for the distribution, correlation and convergence checks.

Prints per-replication scores and their medians; the acceptance bounds were
fixed from this output before the suite was written.

    python scripts/pilot_simulation.py --reps 20
"""
import argparse
import time

import numpy as np

from panelmi.simulate import correlation_replication, distribution_replication, rhat_values


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--first-seed", type=int, default=0)
    args = ap.parse_args()
    seeds = range(args.first_seed, args.first_seed + args.reps)

    t0 = time.perf_counter()
    ks, ks_ms, ovl, rhats = [], [], [], []
    for s in seeds:
        out = distribution_replication(s)
        ks.append(out.ks_pmm)
        ks_ms.append(out.ks_mean_sub)
        ovl.append(out.ovl)
        rhats.append(max(max(v) for v in rhat_values(out.result).values()))
        print(f"dist seed={s:3d} ks_pmm={out.ks_pmm:.4f} ks_mean={out.ks_mean_sub:.4f} "
              f"ovl={out.ovl:.4f} max_rhat={rhats[-1]:.3f}")
    print(f"median ks_pmm={np.median(ks):.4f} (max {np.max(ks):.4f})  "
          f"median ks_mean={np.median(ks_ms):.4f}  median ovl={np.median(ovl):.4f} (min {np.min(ovl):.4f})")
    print(f"replications with max rhat >= 1.2: {sum(r >= 1.2 for r in rhats)}/{len(rhats)}  "
          f"[{time.perf_counter() - t0:.1f}s]")

    t0 = time.perf_counter()
    diffs, flips = [], 0
    for s in seeds:
        out = correlation_replication(s)
        diffs.append(out.max_abs_diff)
        flips += out.sign_flips
        print(f"corr seed={s:3d} max|drho|={out.max_abs_diff:.4f} flips={out.sign_flips}")
    print(f"median max|drho|={np.median(diffs):.4f} (max {np.max(diffs):.4f}) flips={flips} "
          f"[{time.perf_counter() - t0:.1f}s]")


if __name__ == "__main__":
    main()
