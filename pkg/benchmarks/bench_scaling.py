"""Gibbs per-sweep time over p on tri-diagonal data with n = 2p (compiled core).

``python3 benchmarks/bench_scaling.py --p 50,100,200,400`` prints the time
per sweep and the growth factor per step in p.
"""
from __future__ import annotations

import argparse

from ssggm.bench import backend_bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", default="50,100,200")
    ap.add_argument("--sweeps", type=int, default=20)
    ap.add_argument("--backend", default="compiled")
    args = ap.parse_args()
    rows = backend_bench([int(x) for x in args.p.split(",")], 2.0, ["gibbs"], args.sweeps, 0, [args.backend])
    prev = None
    for r in rows:
        growth = "" if prev is None else f"  x{r['sec_per_sweep'] / prev:.2f}"
        print(f"p={r['p']:<5} {1000 * r['sec_per_sweep']:9.3f} ms/sweep{growth}")
        prev = r["sec_per_sweep"]


if __name__ == "__main__":
    main()
