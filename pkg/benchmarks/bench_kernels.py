"""Benchmark the compiled stencil kernels against the NumPy fallback.

Usage:  PYTHONPATH=src python3 benchmarks/bench_kernels.py [--quick]

Times the three hot kernels (field Laplacian+gradient, Jacobian-vector
combine, Hessian sweep) and one multigrid V-cycle on unit-ball grids of
growing size, then prints a per-kernel speedup table.  Also reports an
end-to-end solve on the largest grid with each backend.
"""

import argparse
import time

import numpy as np

import ylab._kernels_py as kpy
from ylab import geometry, grid, pde

try:
    import ylab._kernels_cy as kcy
except ImportError:
    kcy = None


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(h, repeats):
    fld = grid.build_grid(geometry.ball(3, 1.0), h)
    t = fld.table
    rng = np.random.default_rng(0)
    v = np.zeros(int(np.prod(fld.dims)))
    v[t.interior] = rng.normal(size=t.num_interior) ** 2 + 0.1
    idx = fld.reported_index(2.0)
    rows = []
    mods = [("python", kpy)] + ([("cython", kcy)] if kcy else [])
    for name, mod in mods:
        t_lap = timeit(lambda: mod.lap_grad(v, t, t.anc_m, t.anc_p), repeats)
        t_hess = timeit(lambda: mod.hessian(v, idx, t.strides, t.h, t.n), repeats)
        mask = np.ascontiguousarray(
            (fld.mask == grid.MASK_INTERIOR), dtype=float)
        z = np.zeros(fld.dims)
        rhs = np.ascontiguousarray(rng.normal(size=fld.dims) * mask)
        t_mg = timeit(lambda: mod.mg_sweep(z.copy(), rhs, mask, t.h, 0.8, 2),
                      repeats)
        rows.append((name, t_lap, t_hess, t_mg))
    return fld.table.num_interior, rows


def bench_solve(h):
    import os

    results = {}
    for backend in ("python", "cython") if kcy else ("python",):
        os.environ["YLAB_BACKEND"] = backend
        import importlib

        import ylab.kernels

        importlib.reload(ylab.kernels)
        importlib.reload(pde)
        t0 = time.perf_counter()
        _, report = pde.solve_v(geometry.ball(3, 1.0), h)
        results[backend] = (time.perf_counter() - t0, report.iterations,
                            sum(report.linear_iterations))
    os.environ.pop("YLAB_BACKEND", None)
    return results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    sizes = [1 / 16, 1 / 32] if args.quick else [1 / 16, 1 / 32, 1 / 48]
    repeats = 3 if args.quick else 5

    print(f"compiled extension available: {kcy is not None}\n")
    print(f"{'nodes':>9} {'backend':>8} {'lap+grad':>10} {'hessian':>10} "
          f"{'mg sweep':>10} {'speedup':>8}")
    for h in sizes:
        n, rows = bench_kernels(h, repeats)
        base = rows[0][1]
        for name, t_lap, t_hess, t_mg in rows:
            print(f"{n:>9} {name:>8} {t_lap * 1e3:>9.1f}ms {t_hess * 1e3:>9.1f}ms "
                  f"{t_mg * 1e3:>9.1f}ms {base / t_lap:>7.1f}x")
    h_solve = 1 / 32 if args.quick else 1 / 48
    print(f"\nend-to-end solve, unit ball h = 1/{round(1 / h_solve)}:")
    for backend, (wall, its, lin) in bench_solve(h_solve).items():
        print(f"  {backend:>8}: {wall:7.1f}s   ({its} Newton steps, "
              f"{lin} Krylov iterations)")


if __name__ == "__main__":
    main()
