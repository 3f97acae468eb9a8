"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage:
    python benchmarks/bench_kernels.py [--quick]

Timings cover the three hot paths: exact waiting-time sampling for the
tag Monte Carlo, the ensemble RK4 integrator, and the coincidence
correlator.  The numba numbers include neither compilation nor cache
loading (kernels are warmed first).
"""

import argparse
import math
import time

import numpy as np

from tlsrf import _accel, bloch, core, lamp, trajectory


def timeit(fn, repeats=3):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_leg_solver(n):
    qd = core.PAPER_QD.tls
    rng = core.stream(1)
    u = rng.random(n)
    starts = (rng.random(n) < 0.75).astype(np.int8)
    args = (1.697, 0.0, 1.0 / qd.t2, 1e5)

    def run_numpy():
        trajectory._solve_legs_numpy(u, starts, *args)

    out = np.empty(n)

    def run_numba():
        trajectory._solve_legs_numba(u, starts, *args, out)

    return run_numpy, run_numba


def bench_rk4_ensemble(n_samples, n_steps=700):
    qd = core.PAPER_QD.tls
    omegas = core.stream(2).exponential(51.84, size=n_samples) ** 0.5
    amps = np.ones(n_steps)

    def make(kernel):
        def run():
            acc = [np.zeros(n_steps + 1) for _ in range(4)]
            kernel(n_steps, 0.005, amps, omegas, 0.0, qd.t1, qd.t2, *acc)

        return run

    return make(bloch._rk4_ensemble_numpy), make(bloch._rk4_ensemble_numba)


def bench_correlator(n_tags):
    rng = core.stream(3)
    t1 = np.sort(rng.uniform(0, n_tags / 0.15, n_tags))
    t2 = np.sort(rng.uniform(0, n_tags / 0.15, n_tags))

    def run_numpy():
        counts = np.zeros(400, dtype=np.int64)
        trajectory._corr_window_numpy(t1, t2, 20.0, 0.1, counts)

    def run_numba():
        counts = np.zeros(400, dtype=np.int64)
        trajectory._corr_window_numba(t1, t2, 20.0, 0.1, counts)

    return run_numpy, run_numba


def bench_lamp_corr(n):
    rng = core.stream(4)
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    ii = np.abs(z) ** 2

    def run_numpy():
        lamp._intensity_corr_numpy(ii, 64)

    def run_numba():
        out = np.empty(64)
        lamp._intensity_corr_numba(ii, 64, out)

    return run_numpy, run_numba


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = parser.parse_args()
    scale = 8 if args.quick else 1

    if not _accel.HAVE_NUMBA:
        print("numba is not installed; only the numpy path can be timed")

    cases = [
        ("waiting-time legs (bisection)", *bench_leg_solver(1_000_000 // scale)),
        ("RK4 ensemble", *bench_rk4_ensemble(10_000 // scale)),
        ("tag correlator", *bench_correlator(400_000 // scale)),
        ("intensity autocorrelation", *bench_lamp_corr(1_000_000 // scale)),
    ]

    print(f"{'kernel':36s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}")
    for name, run_numpy, run_numba in cases:
        t_np = timeit(run_numpy)
        if _accel.HAVE_NUMBA:
            run_numba()  # warm / compile
            t_nb = timeit(run_numba)
            print(f"{name:36s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{name:36s} {t_np:10.3f} {'-':>10s} {'-':>8s}")


if __name__ == "__main__":
    main()
