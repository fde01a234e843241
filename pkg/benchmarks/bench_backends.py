"""Timing comparison of the jitted kernels against the pure-numpy path.

Runs each hot kernel on a representative workload under both backends and
prints a small table. Invoke directly:

    python3 benchmarks/bench_backends.py [--pop 200] [--dim 50] [--reps 200]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from gradevo.kernels import HAS_NUMBA, get_kernels
from gradevo.problems import make_problem
from gradevo.relax import Rng


def _time(fn, reps: int) -> float:
    fn()  # warm up (jit compilation on the numba path)
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench_kernels(pop: int, dim: int, reps: int) -> None:
    rng = Rng(42)
    X = rng.normal(pop, dim) * 10.0
    lo = np.full(dim, -100.0)
    hi = np.full(dim, 100.0)
    V = rng.normal(pop, dim)
    u = rng.uniform(pop, dim)
    gate = (rng.uniform(pop, dim) < 0.5).astype(np.float64)
    donor = X + rng.normal(pop, dim)
    tau = rng.uniform(pop, dim)
    jrand = rng.integers(0, dim, pop)
    r1 = rng.uniform(pop, dim)
    r2 = rng.uniform(pop, dim)

    cases = {
        "sphere_batch": lambda k: k.sphere_batch(X),
        "ackley_batch": lambda k: k.ackley_batch(X),
        "griewank_batch": lambda k: k.griewank_batch(X),
        "rosenbrock_batch": lambda k: k.rosenbrock_batch(X),
        "michalewicz_batch": lambda k: k.michalewicz_batch(X),
        "sbx_children": lambda k: k.sbx_children(X, donor, u, 15.0),
        "poly_mutation": lambda k: k.poly_mutation(X, u, gate, 20.0, lo, hi),
        "de_trial": lambda k: k.de_trial(X, donor, tau, jrand, 0.9, lo, hi),
        "pso_step": lambda k: k.pso_step(
            X, V, X - 1.0, X[0], r1, r2, 0.7298, 1.49618, 1.49618,
            40.0 * np.ones(dim), lo, hi,
        ),
    }

    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    kernels = {b: get_kernels(b) for b in backends}

    print(f"kernel timings, pop={pop} dim={dim} reps={reps} (mean seconds)")
    header = f"{'kernel':<20s}" + "".join(f"{b:>12s}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for name, call in cases.items():
        times = [_time(lambda b=b: call(kernels[b]), reps) for b in backends]
        row = f"{name:<20s}" + "".join(f"{t:12.3e}" for t in times)
        if len(times) == 2 and times[1] > 0:
            row += f"{times[0] / times[1]:10.2f}x"
        print(row)
    if not HAS_NUMBA:
        print("numba is not installed; only the numpy path was timed")


def bench_generation(pop: int, dim: int, reps: int) -> None:
    """One classical generation per backend, GA and DE."""
    from gradevo.classic import ClassicDe, ClassicGa

    print(f"\nclassical generation timings, pop={pop} dim={dim} (mean seconds)")
    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    for algo_cls in (ClassicGa, ClassicDe):
        times = []
        for backend in backends:
            import gradevo.kernels as km

            saved = km.BACKEND
            try:
                km.set_backend(backend)
                problem = make_problem("ackley", dim)
                algo = algo_cls(problem, pop, Rng(7))
                algo.generation()  # init + warm up
                t0 = time.perf_counter()
                for _ in range(max(reps // 10, 1)):
                    algo.generation()
                times.append(
                    (time.perf_counter() - t0) / max(reps // 10, 1)
                )
            finally:
                km.set_backend(saved)
        row = f"{algo_cls.name:<20s}" + "".join(f"{t:12.3e}" for t in times)
        if len(times) == 2 and times[1] > 0:
            row += f"{times[0] / times[1]:10.2f}x"
        print(row)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pop", type=int, default=200)
    ap.add_argument("--dim", type=int, default=50)
    ap.add_argument("--reps", type=int, default=200)
    args = ap.parse_args()
    bench_kernels(args.pop, args.dim, args.reps)
    bench_generation(args.pop, args.dim, args.reps)


if __name__ == "__main__":
    main()
