"""Per-sweep time of the compiled core against the pure-Python fallback.

Run ``python3 benchmarks/bench_backends.py [--p 10,25,50] [--algorithms gibbs,gimh]``.
Both backends consume the same random stream, so they run the same chain
and the timings compare identical work.
"""
from __future__ import annotations

import argparse

from ssggm.bench import backend_bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", default="10,25,50")
    ap.add_argument("--algorithms", default="gibbs,bdmh,lit,gimh")
    ap.add_argument("--sweeps", type=int, default=5)
    ap.add_argument("--n-factor", type=float, default=2.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rows = backend_bench([int(x) for x in args.p.split(",")], args.n_factor, args.algorithms.split(","),
                         args.sweeps, args.seed)
    print(f"{'p':>5} {'algorithm':<9} {'backend':<9} {'ms/sweep':>10} {'speedup':>8}")
    for r in rows:
        print(f"{r['p']:>5} {r['algorithm']:<9} {r['backend']:<9} {1000 * r['sec_per_sweep']:>10.3f} "
              f"{r['speedup_vs_python']:>8.1f}")


if __name__ == "__main__":
    main()
