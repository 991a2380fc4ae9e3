"""Hot numeric kernels with a numba path and a pure numpy/scipy fallback.

The fallback is selected by setting ``STRAINSIS_NUMBA=0`` in the environment
before import (or when numba is not importable). Both paths share signatures
and are cross-checked in ``tests/test_kernels.py``.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.linalg import solve_banded

_WANT_NUMBA = os.environ.get("STRAINSIS_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    if not _WANT_NUMBA:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised by the fallback CI leg
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# numpy reference implementations
# --------------------------------------------------------------------------

def _infection_np(v, S, beta, gamma, h):
    return (S * h) * (beta @ (np.abs(v) ** (1.0 + gamma)))


def _thomas_np(lower, diag, upper, rhs):
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def _flux_apply_np(face, v):
    flux = face * np.diff(v)
    out = np.zeros_like(v)
    out[:-1] += flux
    out[1:] -= flux
    return out


def _power_iterate_np(M, x, max_iter, tol):
    lam = 0.0
    for k in range(1, max_iter + 1):
        y = M @ x
        nrm = np.abs(y).sum()
        y /= nrm
        My = M @ y
        lam_new = y @ My / (y @ y)
        res = np.abs(My - lam_new * y).sum()
        scale = tol * (abs(lam_new) + 1.0)
        if k > 1 and abs(lam_new - lam) <= scale and res <= scale:
            return y, lam_new, k
        lam = lam_new
        x = y
    return x, lam, max_iter


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _infection_nb(v, S, beta, gamma, h):
        n = v.shape[0]
        w = np.empty(n)
        for j in range(n):
            w[j] = abs(v[j]) ** (1.0 + gamma[j])
        # the dense product goes through BLAS
        return (S * h) * (np.ascontiguousarray(beta) @ w)

    @njit(cache=True)
    def _thomas_nb(lower, diag, upper, rhs):
        n = diag.shape[0]
        c = np.empty(n)
        d = np.empty(n)
        c[0] = upper[0] / diag[0] if n > 1 else 0.0
        d[0] = rhs[0] / diag[0]
        for i in range(1, n):
            denom = diag[i] - lower[i - 1] * c[i - 1]
            if i < n - 1:
                c[i] = upper[i] / denom
            d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom
        x = np.empty(n)
        x[n - 1] = d[n - 1]
        for i in range(n - 2, -1, -1):
            x[i] = d[i] - c[i] * x[i + 1]
        return x

    @njit(cache=True)
    def _flux_apply_nb(face, v):
        n = v.shape[0]
        out = np.zeros(n)
        for i in range(n - 1):
            flux = face[i] * (v[i + 1] - v[i])
            out[i] += flux
            out[i + 1] -= flux
        return out

    @njit(cache=True)
    def _power_iterate_nb(M, x, max_iter, tol):
        lam = 0.0
        M = np.ascontiguousarray(M)
        for k in range(1, max_iter + 1):
            y = M @ x
            y /= np.abs(y).sum()
            My = M @ y
            lam_new = (y @ My) / (y @ y)
            res = np.abs(My - lam_new * y).sum()
            scale = tol * (abs(lam_new) + 1.0)
            if k > 1 and abs(lam_new - lam) <= scale and res <= scale:
                return y, lam_new, k
            lam = lam_new
            x = y
        return x, lam, max_iter

    infection_kernel = _infection_nb
    thomas_solve = _thomas_nb
    flux_apply = _flux_apply_nb
    power_iterate = _power_iterate_nb
else:
    infection_kernel = _infection_np
    thomas_solve = _thomas_np
    flux_apply = _flux_apply_np
    power_iterate = _power_iterate_np

# Always-available reference versions, used by tests and the benchmark.
numpy_kernels = {
    "infection": _infection_np,
    "thomas": _thomas_np,
    "flux_apply": _flux_apply_np,
    "power_iterate": _power_iterate_np,
}
