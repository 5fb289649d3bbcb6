"""Timing comparison of the compiled kernels against the pure-Python
fallback, on the shapes the malware benchmark actually hits.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from mfgsolve import _kernels_py

try:
    from mfgsolve import _kernels_c
except ImportError:
    _kernels_c = None


def timeit(fn, repeat=50):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_pair(name, make_args, py_fn, c_fn, repeat=50):
    args = make_args()
    t_py = timeit(lambda: py_fn(*args), repeat)
    if c_fn is None:
        print(f"{name:34s} python {t_py * 1e3:8.3f} ms   (no compiled build)")
        return
    t_c = timeit(lambda: c_fn(*args), repeat)
    print(f"{name:34s} python {t_py * 1e3:8.3f} ms   compiled "
          f"{t_c * 1e3:8.3f} ms   speedup {t_py / t_c:6.1f}x")


def main():
    rng = np.random.default_rng(0)

    def sarsa_args(n_pairs, n_sweeps):
        q0 = rng.normal(size=n_pairs)
        targets = np.ascontiguousarray(rng.normal(size=(n_pairs, n_sweeps)))
        return lambda: (q0, targets, 0.1, n_sweeps // 2)

    def pg_args(n_x, n_a, steps):
        logits = np.ascontiguousarray(rng.normal(size=(n_x, n_a)))
        q = np.ascontiguousarray(rng.normal(size=(n_x, n_a)))
        lr = np.full(n_x, 0.5)
        return lambda: (logits, q, lr, steps)

    print(f"numpy {np.__version__}; compiled kernels "
          f"{'available' if _kernels_c else 'MISSING'}\n")
    bench_pair("sarsa_scan 4 pairs x 2000 sweeps", sarsa_args(4, 2000),
               _kernels_py.sarsa_scan,
               _kernels_c.sarsa_scan if _kernels_c else None)
    bench_pair("sarsa_scan 4 pairs x 5000 sweeps", sarsa_args(4, 5000),
               _kernels_py.sarsa_scan,
               _kernels_c.sarsa_scan if _kernels_c else None)
    bench_pair("pg_ascent 2x2, 100 steps", pg_args(2, 2, 100),
               _kernels_py.pg_ascent,
               _kernels_c.pg_ascent if _kernels_c else None, repeat=200)
    bench_pair("pg_ascent 6x8, 100 steps", pg_args(6, 8, 100),
               _kernels_py.pg_ascent,
               _kernels_c.pg_ascent if _kernels_c else None, repeat=200)

    # one full RL stage point on the shipped benchmark, per backend
    import mfgsolve as m
    from mfgsolve import kernels
    from mfgsolve import rng as rngmod

    env = m.malware_env()
    grid = m.build_grid(2, 50)
    cfg = m.RlConfig(seed=1)
    v_next = np.zeros((grid.n_points, 2))

    def stage_point():
        m.solve_stage_rl(grid.points[25], v_next, grid, env, cfg,
                         rngmod.stream(1, 0, 59, 25))

    t = timeit(stage_point, repeat=5)
    full_minutes = t * grid.n_points * env.horizon / 60.0
    print(f"\nsolve_stage_rl (I=50, L=2000) with {kernels.BACKEND} kernels: "
          f"{t * 1e3:.1f} ms/grid point (~{full_minutes:.1f} min full solve)")


if __name__ == "__main__":
    main()
