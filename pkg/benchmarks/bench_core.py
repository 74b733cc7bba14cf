"""Compare the compiled kernels in ``coarsekit._core`` with the numpy fallback.

    python benchmarks/bench_core.py [--repeat 3] [--quick]
"""

import argparse
import time

import numpy as np

from coarsekit import _core_py
from coarsekit.graphs import FiniteGraph, _closed_masks, random_regular_with_girth

try:
    from coarsekit import _core
except ImportError:  # extension not built
    _core = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(quick):
    g = random_regular_with_girth(3, 300 if quick else 1000, 7, seed=1)
    ip, ix = g.csr
    masks = _closed_masks(FiniteGraph.cycle(16 if quick else 20))
    rng = np.random.default_rng(0)
    a = rng.standard_normal((40 if quick else 80,) * 2)
    a = a + a.T
    return [
        ("all_pairs_bfs", lambda m: m.all_pairs_bfs(ip, ix)),
        ("girth", lambda m: m.girth(ip, ix)),
        ("min_closed_expansion", lambda m: m.min_closed_expansion(masks, len(masks))),
        ("jacobi_eigh", lambda m: m.jacobi_eigh(a)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--quick", action="store_true", help="smaller inputs")
    args = parser.parse_args()
    if _core is None:
        print("compiled extension not available; only the fallback can run")
    print(f"{'kernel':<22}{'compiled [s]':>14}{'python [s]':>14}{'speedup':>10}")
    for name, run in cases(args.quick):
        slow = best_of(lambda: run(_core_py), args.repeat)
        if _core is None:
            print(f"{name:<22}{'-':>14}{slow:>14.4f}{'-':>10}")
            continue
        fast = best_of(lambda: run(_core), args.repeat)
        print(f"{name:<22}{fast:>14.4f}{slow:>14.4f}{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
