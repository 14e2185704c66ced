"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py
(Compare against TEAMPLAN_DISABLE_NUMBA=1 to see the fallback-only package.)
"""

import time

import numpy as np

from teamplan import kernels


def timeit(fn, *args, repeat=200, warmup=3):
    for _ in range(warmup):
        fn(*args)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_mc_makespan(rng):
    n = 4
    kh = np.array([0, 0], dtype=np.int8)
    th = np.array([2, 0], dtype=np.int64)
    kr = np.array([0, 1, 0], dtype=np.int8)
    tr = np.array([3, 0, 1], dtype=np.int64)
    pred = np.zeros((n, n), dtype=np.bool_)
    for i, j in ((2, 0), (2, 1), (3, 0), (3, 1)):
        pred[i, j] = True
    agent_of = np.array([0, 1, 0, 1], dtype=np.int8)
    robot_dur = np.array([0.0, 2.8, 0.0, 3.3])
    draws = rng.uniform(1.0, 6.0, size=(200, n))
    out = np.empty(200)
    args = (kh, th, kr, tr, pred, agent_of, robot_dur, draws, out)
    return args


def main():
    rng = np.random.default_rng(0)
    rows = []

    args = bench_mc_makespan(rng)
    rows.append(("mc_makespan (K=200)",
                 timeit(kernels.mc_makespan_np, *args),
                 timeit(kernels.mc_makespan, *args)))

    grid = rng.uniform(0, 1, size=(1600, 2))
    traj = rng.uniform(0, 1, size=(64, 2))
    out = np.empty(1600)
    rows.append(("grid_point_costs (V=1600, L=64)",
                 timeit(kernels.grid_point_costs_np, grid, traj, 5.0, out),
                 timeit(kernels.grid_point_costs, grid, traj, 5.0, out)))

    values = rng.uniform(0, 1, size=(40, 40))
    pts = rng.uniform(0, 1, size=(64, 2))
    out = np.empty(64)
    bil_args = (values, 0.0, 0.0, 1 / 39, 1 / 39, 40, 40, pts, out)
    rows.append(("bilinear (40x40, 64 pts)",
                 timeit(kernels.bilinear_np, *bil_args, repeat=2000),
                 timeit(kernels.bilinear, *bil_args, repeat=2000)))

    walls = np.array([[0.12, 0.5, 0.44, 0.5], [0.56, 0.5, 0.88, 0.5]])
    path = rng.uniform(0, 1, size=(64, 2))
    rows.append(("path_hits_walls (64 pts)",
                 timeit(kernels.path_hits_walls_np, path, walls, repeat=500),
                 timeit(kernels.path_hits_walls, path, walls, repeat=2000)))

    print(f"active backend: {kernels.backend_name()}\n")
    print(f"{'kernel':36s} {'numpy':>12s} {'active':>12s} {'speedup':>9s}")
    for name, t_np, t_active in rows:
        print(f"{name:36s} {t_np * 1e6:10.1f}us {t_active * 1e6:10.1f}us "
              f"{t_np / t_active:8.1f}x")


if __name__ == "__main__":
    main()
