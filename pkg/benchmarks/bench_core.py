"""Compiled versus pure-Python core on the two scalar hot loops.

Run with ``python3 benchmarks/bench_core.py [--repeat N]``. Prints one line
per kernel with the best wall time of each backend and the speedup, and
checks that both backends return identical results.
"""
import argparse
import time

import numpy as np

from fredholm2d import _backend, _pycore
from fredholm2d.geometry import named_domain
from fredholm2d.nodes import generate_nodes
from fredholm2d.reconstruction import build_mls


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--h", type=float, default=0.02, help="node spacing for poisson_disk")
    args = ap.parse_args(argv)
    if _backend.core is _pycore:
        print("compiled core not built; run `python3 setup.py build_ext --inplace` first")
        return 1
    compiled = _backend.core

    dom = named_domain("unit_disk")
    cases = {
        "poisson_disk": lambda be: generate_nodes(dom, args.h, seed=0, backend=be).points,
    }
    X = generate_nodes(dom, 0.05, seed=1)
    Y = generate_nodes(dom, 0.025, seed=2)
    for p in (1, 3):
        cases[f"mls_rows p={p}"] = (
            lambda be, p=p: build_mls(X, Y, p, 1.5, backend=be).matrix.toarray())

    print(f"{'kernel':<16}{'cython [s]':>12}{'python [s]':>12}{'speedup':>10}  identical")
    for name, fn in cases.items():
        tc, rc = best_of(lambda: fn(compiled), args.repeat)
        tp, rp = best_of(lambda: fn(_pycore), args.repeat)
        same = rc.shape == rp.shape and float(np.abs(rc - rp).max(initial=0.0)) <= 1e-12
        print(f"{name:<16}{tc:>12.4f}{tp:>12.4f}{tp / tc:>9.1f}x  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
