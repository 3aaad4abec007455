#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs each hot kernel on filter-sized inputs and on a full extended-filter
pass, then prints a table of per-call times and speedups.  The package
selects its backend at import time via the DFSCORE_NUMBA environment
variable; this script imports both implementations directly so one process
can time them side by side.

Usage: python benchmarks/bench_kernels.py [--repeat 7]
"""

import argparse
import time

import numpy as np

from dfscore import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_pair(name, np_fn, nb_fn, repeat, rows):
    t_np = best_of(np_fn, repeat)
    if nb_fn is not None:
        nb_fn()  # warm the JIT outside the timing
        t_nb = best_of(nb_fn, repeat)
        rows.append((name, t_np * 1e3, t_nb * 1e3, t_np / t_nb))
    else:
        rows.append((name, t_np * 1e3, float("nan"), float("nan")))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=7)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    have_numba = kernels._HAVE_NUMBA

    n = 10**6
    logw = rng.normal(size=n) - 40.0
    x3 = rng.normal(size=(n, 3))
    w = np.full(n, 1.0 / n)
    cumw = np.cumsum(w)
    positions = rng.random(n)
    ys = rng.normal(size=10**4)

    rows = []
    bench_pair(
        f"normalize_log_weights (n={n:.0e})",
        lambda: kernels.normalize_log_weights_np(logw),
        (lambda: kernels.normalize_log_weights_nb(logw)) if have_numba else None,
        args.repeat,
        rows,
    )
    bench_pair(
        f"weighted_mean_cov (n={n:.0e}, d=3)",
        lambda: kernels.weighted_mean_cov_np(x3, w),
        (lambda: kernels.weighted_mean_cov_nb(x3, w)) if have_numba else None,
        args.repeat,
        rows,
    )
    bench_pair(
        f"weighted_crosscov (n={n:.0e}, d=3)",
        lambda: kernels.weighted_crosscov_np(x3, x3, w),
        (lambda: kernels.weighted_crosscov_nb(x3, x3, w)) if have_numba else None,
        args.repeat,
        rows,
    )
    bench_pair(
        f"inverse_cdf_indices (n={n:.0e})",
        lambda: kernels.inverse_cdf_indices_np(cumw, positions),
        (lambda: kernels.inverse_cdf_indices_nb(cumw, positions)) if have_numba else None,
        args.repeat,
        rows,
    )
    bench_pair(
        "kalman_loglik_core (T=1e4)",
        lambda: kernels.kalman_loglik_core_np(ys, 0.8, 1.0, 0.5, 0.0, 1.0),
        (lambda: kernels.kalman_loglik_core_nb(ys, 0.8, 1.0, 0.5, 0.0, 1.0))
        if have_numba
        else None,
        args.repeat,
        rows,
    )

    # end-to-end: one extended-filter pass at acceptance scale
    import dfscore as dfs

    spec = dfs.LinearGaussianSSM(
        free=("phi",),
        fixed={"log_sigma_v": 0.0, "log_sigma_w": 0.0},
        init="fixed",
        init_sd=1.0,
    )
    ssm = spec.state_space()
    theta = np.array([0.6])
    _, obs = dfs.simulate(ssm, theta, 50, np.random.default_rng(1))
    kern = dfs.make_gaussian_kernel([2.0])

    def filter_pass():
        cfg = dfs.ExtendedFilterConfig(
            theta=theta, tau=0.05, kernel=kern, lag=10, n_particles=5000
        )
        dfs.run_extended_bootstrap(ssm, obs, cfg, rng=np.random.default_rng(2))

    filter_pass()
    t_filter = best_of(filter_pass, max(3, args.repeat // 2))
    rows.append(
        (
            f"extended filter pass (T=50, N=5000) [{kernels.backend()} backend]",
            t_filter * 1e3,
            float("nan"),
            float("nan"),
        )
    )

    print(f"active backend: {kernels.backend()}  (set DFSCORE_NUMBA=0 to disable numba)")
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy ms':>10}  {'numba ms':>10}  {'speedup':>8}")
    for name, t_np, t_nb, speedup in rows:
        nb = f"{t_nb:10.3f}" if np.isfinite(t_nb) else "         -"
        sp = f"{speedup:8.2f}" if np.isfinite(speedup) else "       -"
        print(f"{name:<{width}}  {t_np:10.3f}  {nb}  {sp}")


if __name__ == "__main__":
    main()
