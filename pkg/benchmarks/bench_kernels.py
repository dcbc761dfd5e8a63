"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--solve]

Each kernel runs on inputs of the size it sees inside the solver; ``--solve``
adds an end-to-end branch-and-bound run on a small instance per backend.
The first numba call (compilation or cache load) is excluded from timings.
"""
import argparse
import time

import numpy as np

from assortopt import _kernels as K
from assortopt.bb import SolveConfig, solve
from assortopt.generators import GeneratorConfig, gen_tiny, generate
from assortopt.model import build


def _inputs(rng):
    m, n = 4, 16
    nu = rng.uniform(0, 1, (m, n))
    rn = nu * rng.uniform(1, 3, n)
    cases = {
        "enumerate(n=16)": lambda: K.enumerate_best(np.full(m, 0.25), np.ones(m), nu, rn, np.ones((1, n)), np.array([5.0])),
        "bnd(n=16)": lambda: K.enumerate_bnd(nu[0], rng.uniform(0, 1, (1, n)), np.array([3.0]), 2, 1),
        "greedy(n=500)": lambda: K.greedy_fractional(rng.uniform(0, 1, 500), rng.uniform(0, 1, 500), 50.0),
    }
    cols = 2000
    alpha = rng.normal(size=cols)
    d = np.abs(rng.normal(size=cols))
    at_upper = rng.random(cols) < 0.3
    movable = rng.random(cols) < 0.8
    cases["ratio(cols=2000)"] = lambda: K.dual_ratio_test(alpha, d, at_upper, movable, 1.0)
    mm = 300
    inv0 = np.linalg.inv(rng.normal(size=(mm, mm)) + mm * np.eye(mm))
    col = rng.normal(size=mm)
    col[7] += 5.0
    cases["inverse_update(m=300)"] = lambda: K.inverse_update(inv0.copy(), col, 7)
    k = 50
    rows = rng.integers(0, mm, k)
    etas = rng.normal(size=(k, mm))
    etas[np.arange(k), rows] += 5.0
    v = rng.normal(size=mm)
    cases["eta_ftran(m=300,k=50)"] = lambda: K.eta_ftran(v.copy(), rows, etas, k)
    cases["eta_btran(m=300,k=50)"] = lambda: K.eta_btran(v.copy(), rows, etas, k)
    return cases


def _time(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--solve", action="store_true")
    args = ap.parse_args()
    backends = ["numpy"] + (["numba"] if K.NUMBA_KERNELS else [])
    cases = _inputs(np.random.default_rng(0))
    print(f"{'kernel':<26}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in cases.items():
        times = []
        for b in backends:
            with K.use_backend(b):
                times.append(_time(fn, args.repeat))
        line = f"{name:<26}" + "".join(f"{t * 1e3:>10.3f}ms" for t in times)
        if len(times) == 2:
            line += f"{times[0] / times[1]:>11.1f}x"
        print(line)
    if args.solve:
        insts = [gen_tiny(12, 4, s) for s in range(10)]
        desk = generate(GeneratorConfig("custom", 50, 10, 5.0, 10, seed=1))
        for label, work in [("10 tiny x conic", lambda: [solve(build(i, "conic"), SolveConfig()) for i in insts]),
                            ("desk conic-mc", lambda: solve(build(desk, "conic-mc"), SolveConfig()))]:
            times = []
            for b in backends:
                with K.use_backend(b):
                    times.append(_time(work, 1))
            print(f"{label:<26}" + "".join(f"{t:>11.2f}s" for t in times)
                  + (f"{times[0] / times[1]:>11.1f}x" if len(times) == 2 else ""))


if __name__ == "__main__":
    main()
