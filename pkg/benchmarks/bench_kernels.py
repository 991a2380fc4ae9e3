"""Compare the numba kernels against the numpy/scipy fallback.

    python benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 20]

Also times a full imex_cn run under each backend in a subprocess, since the
backend is chosen at import time from STRAINSIS_NUMBA.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from strainsis import _kernels


def _cases(n, rng):
    v = rng.random(n) + 0.1
    beta = rng.random((n, n))
    gamma = rng.random(n)
    face = rng.random(n - 1) + 0.5
    off = -face
    diag = np.ones(n)
    diag[:-1] += face
    diag[1:] += face
    rhs = rng.random(n)
    M = rng.random((n, n)) + np.eye(n) * n
    return {
        "infection": ((v, 0.7, beta, gamma, 1.0 / n), {}),
        "thomas": ((off, diag, off.copy(), rhs), {}),
        "flux_apply": ((face, v), {}),
        "power_iterate": ((M, np.ones(n) / n, 200, 1e-12), {}),
    }


def bench_kernels(sizes, repeat):
    rng = np.random.default_rng(0)
    fast = {
        "infection": _kernels.infection_kernel,
        "thomas": _kernels.thomas_solve,
        "flux_apply": _kernels.flux_apply,
        "power_iterate": _kernels.power_iterate,
    }
    print(f"backend: {_kernels.BACKEND}")
    print(f"{'kernel':14s} {'n':>5s} {'numpy [us]':>12s} {'active [us]':>12s} {'speedup':>8s}")
    for n in sizes:
        for name, (args, kw) in _cases(n, rng).items():
            fast[name](*args, **kw)  # compile outside the timing
            t_np = min(timeit.repeat(lambda: _kernels.numpy_kernels[name](*args, **kw), number=5, repeat=repeat)) / 5
            t_fa = min(timeit.repeat(lambda: fast[name](*args, **kw), number=5, repeat=repeat)) / 5
            print(f"{name:14s} {n:5d} {t_np * 1e6:12.1f} {t_fa * 1e6:12.1f} {t_np / t_fa:8.2f}")


_RUN = """
import time
from strainsis import BACKEND
from strainsis.scenario import get_preset
from strainsis.dynamics import integrate
sc = get_preset("quadratic-constant").with_overrides(n_cells={n}, t_end=1.0)
grid, coeffs, s0 = sc.build()
integrate(s0, coeffs, grid, sc.integrator.__class__(dt=1e-3, t_end=0.01))
t = time.perf_counter()
integrate(s0, coeffs, grid, sc.integrator)
print(BACKEND, time.perf_counter() - t)
"""


def bench_end_to_end(n):
    print(f"\nimex_cn, n={n}, 1000 steps")
    for flag in ("1", "0"):
        env = dict(os.environ, STRAINSIS_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", _RUN.format(n=n)], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        print(f"  {out[0]:6s} {float(out[1]):8.3f} s")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-end-to-end", action="store_true")
    a = ap.parse_args()
    bench_kernels(a.sizes, a.repeat)
    if not a.skip_end_to_end:
        bench_end_to_end(max(a.sizes))
