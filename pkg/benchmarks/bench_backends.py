#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the jet evaluator on single points and grids, plus the two
geometry workloads that dominate real runs (leaf tracing and hexagon
traversal), under both backends.  Usage:

    python benchmarks/bench_backends.py [--repeats N]

The numba path includes JIT warmup before timing.  Expect the fallback
to lose by one to two orders of magnitude on pointwise workloads; that
gap is the reason the kernels carry @njit at all.
"""

import argparse
import time

from triweb.analysis import hexagon_defect
from triweb.expr import parse
from triweb.kernels import HAVE_NUMBA, compile_expr, jet_coeffs, jet_coeffs_many
from triweb.web import Domain, builtin_web, trace_leaf

WEB_FN = "(x+y)*exp(-x)"


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5, help="timing repetitions")
    args = ap.parse_args()

    backends = ["numpy"]
    if HAVE_NUMBA:
        backends.insert(0, "numba")
    else:
        print("numba not importable; timing the fallback only")

    web = builtin_web("paper")
    prog = compile_expr(parse(WEB_FN))
    free = Domain(box=(-2, 2, -2, 2))
    xs, ys = web.domain.grid(41, 41)

    workloads = {
        "jet, 2000 single points": lambda b: [
            jet_coeffs(prog, 0.3, -0.4, backend=b) for _ in range(2000)
        ],
        "jet, 41x41 grid batch": lambda b: jet_coeffs_many(prog, xs, ys, backend=b),
        "leaf trace (arc 1.0 both ways)": lambda b: trace_leaf(
            web.foliation(3), (1.0, 1.0), 1.0, free, 3, backend=b
        ),
        "hexagon (r=0.1)": lambda b: hexagon_defect(
            web, (0.0, 0.0), 0.1, backend=b
        ),
    }

    # warmup compiles the numba kernels and primes caches
    for b in backends:
        for job in workloads.values():
            job(b)

    results = {}
    for name, job in workloads.items():
        results[name] = {
            b: timeit(lambda: job(b), args.repeats) for b in backends
        }

    width = max(len(n) for n in results)
    header = f"{'workload':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, times in results.items():
        row = f"{name:<{width}}  " + "".join(
            f"{times[b] * 1e3:>10.2f}ms" for b in backends
        )
        if len(backends) == 2:
            row += f"{times['numpy'] / times['numba']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
