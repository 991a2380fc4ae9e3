"""Perron spectral bound of Metzler operator matrices and sign-change roots.

The default solver is a Noda-type shift-and-invert iteration: the shift is the
Collatz-Wielandt upper bound ``max_i (A x)_i / x_i`` of the current positive
iterate, so every iterate stays positive and the pair of Collatz-Wielandt
bounds brackets ``s(A)``. The plain shifted power iteration is kept as
``method="power"``; it is correct but its convergence factor degrades like
``1 - O(h^2)`` on fine meshes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import brentq

from . import _kernels
from .errors import ConvergenceError, PreconditionError, SolverError
from .grid import Grid, ModelCoefficients, discrete_W11_norm
from .operators import OperatorMatrix, assemble_psi_R, assemble_psi_uR

DEFAULT_TOL = 1e-10
ROOT_TOL = 1e-8
EPSILON = 1.0  # the positive margin in the "r + eps" brackets


@dataclass(frozen=True)
class SpectralResult:
    s: float
    eigvec: np.ndarray
    iterations: int
    residual: float
    lower: float = math.nan
    upper: float = math.nan


def _as_operator(A) -> OperatorMatrix:
    if isinstance(A, OperatorMatrix):
        return A
    return OperatorMatrix(np.asarray(A, dtype=float), "Linearization")


def _check_metzler(a: np.ndarray) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PreconditionError("operator matrix must be square")
    off = a - np.diag(np.diag(a))
    if off.min() < 0.0:
        i, j = np.unravel_index(np.argmin(off), off.shape)
        raise PreconditionError(f"matrix is not Metzler: entry ({i}, {j}) = {off[i, j]:.3g} < 0")


def _normalize(x: np.ndarray) -> np.ndarray:
    return x / discrete_W11_norm(x, Grid(x.shape[0]))


def _residual(op, x, s) -> float:
    # h-weighted l1 with h = 1/n
    return float(np.abs(op.apply(x) - s * x).mean())


def spectral_bound(A, tol: float = DEFAULT_TOL, method: str = "noda", max_iter: int | None = None) -> SpectralResult:
    """Spectral bound and positive eigenvector of an irreducible Metzler matrix.

    Parameters
    ----------
    A : OperatorMatrix or ndarray
        Square matrix with nonnegative off-diagonal entries.
    tol : float
        Relative tolerance; the Collatz-Wielandt bracket must shrink below
        ``tol * (|s| + 1)`` (floored at a few ulps of ``||A||``).
    method : {"noda", "power"}

    Returns
    -------
    SpectralResult
        ``eigvec`` is strictly positive with unit discrete W^{1,1} norm.
    """
    op = _as_operator(A)
    a = op.a
    _check_metzler(a)
    n = a.shape[0]
    eps = np.finfo(float).eps
    coarse_floor = 64.0 * eps * max(1.0, np.abs(a).sum(axis=1).max())
    if op.face is not None:
        # flux-form apply: roundoff scales with the non-diffusive part and 1/h
        rest_norm = np.abs(op.rest).sum(axis=1).max()
        floor = 64.0 * eps * max(1.0, rest_norm + 4.0 * float(op.face.max()) / n)
    else:
        floor = coarse_floor
    if method == "power":
        return _power(op, tol, floor, 100_000 if max_iter is None else max_iter)
    if method != "noda":
        raise ValueError(f"unknown method {method!r}")
    max_iter = 500 if max_iter is None else max_iter

    x = np.ones(n) / n
    gap = math.inf
    best, stalled = math.inf, 0
    for it in range(max_iter + 1):
        ax = op.apply(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = ax / x
        if not np.all(np.isfinite(ratio)):
            raise SolverError("Perron iterate underflowed to zero; matrix is likely reducible")
        upper = float(ratio.max())
        lower = float(ratio.min())
        gap = upper - lower
        s = 0.5 * (upper + lower)
        if gap < best:
            best, stalled = gap, 0
        else:
            stalled += 1
        if gap <= max(tol * (abs(s) + 1.0), floor) or (stalled >= 5 and gap <= coarse_floor):
            v = _normalize(x)
            return SpectralResult(s, v, it, _residual(op, v, s), lower, upper)
        if it == max_iter:
            break
        mu = upper + 1e-2 * gap
        try:
            y = lu_solve(lu_factor(mu * np.eye(n) - a, check_finite=False), x, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:  # pragma: no cover
            raise SolverError(f"shifted solve failed: {exc}") from None
        if not np.all(np.isfinite(y)) or y.min() <= 0.0:
            # roundoff when x is already an eigenvector to working precision
            if gap <= coarse_floor:
                v = _normalize(x)
                return SpectralResult(s, v, it, _residual(op, v, s), lower, upper)
            raise SolverError("shift-invert iterate lost positivity; matrix may be reducible")
        x = y / y.sum()
    raise ConvergenceError(
        f"spectral bound did not converge in {max_iter} iterations (bracket width {gap:.3e})", gap
    )


def _power(op, tol, floor, max_iter) -> SpectralResult:
    a = op.a
    n = a.shape[0]
    sigma = float(np.abs(np.diag(a)).max()) + 1.0
    M = a + sigma * np.eye(n)
    x, lam, it = _kernels.power_iterate(np.ascontiguousarray(M), np.ones(n) / n, max_iter, min(tol, 1e-3) * 1e-2)
    x = np.abs(x)
    s = float(lam) - sigma
    v = _normalize(x)
    res = _residual(op, v, s)
    if it >= max_iter or res > max(tol * (abs(s) + 1.0), floor) * 1e3:
        raise ConvergenceError(f"power iteration stagnated after {it} iterations (residual {res:.3e})", res)
    return SpectralResult(s, v, it, res)


# --------------------------------------------------------------------------
# Roots along R and along rays
# --------------------------------------------------------------------------

def _check_bilinear_hypotheses(coeffs: ModelCoefficients, grid: Grid) -> np.ndarray:
    if not coeffs.gamma_identically_zero:
        raise PreconditionError("the S* root requires gamma == 0 (bilinear incidence)")
    if np.all(coeffs.rho == 0.0):
        raise PreconditionError("hypothesis violated: rho must not vanish identically (rho != 0)")
    row_int = grid.h * coeffs.beta.sum(axis=1)
    if row_int.min() <= 0.0:
        raise PreconditionError(
            "hypothesis violated: int_0^1 beta(x, y) dy > 0 must hold for every x "
            f"(row {int(np.argmin(row_int))} integrates to 0)"
        )
    return row_int


def _root(f, lo, hi, tol, what):
    flo, fhi = f(lo), f(hi)
    if not (flo < 0.0 < fhi):
        raise SolverError(f"{what}: no sign change on [{lo:.6g}, {hi:.6g}] (s = {flo:.3g}, {fhi:.3g})")
    root = brentq(f, lo, hi, xtol=1e-15 * max(hi, 1.0), rtol=4 * np.finfo(float).eps, maxiter=200)
    val = f(root)
    if abs(val) > tol:
        raise ConvergenceError(f"{what}: |s| = {val:.3e} at the root exceeds {tol:.1e}", abs(val))
    return root


def find_S_star(coeffs: ModelCoefficients, grid: Grid, bracket_hint: tuple[float, float] | None = None,
                tol: float = ROOT_TOL) -> float:
    """Susceptible level ``R*`` at which ``s(Psi_R)`` changes sign (gamma == 0)."""
    row_int = _check_bilinear_hypotheses(coeffs, grid)
    r = coeffs.bounds.r
    R_hi = (r + EPSILON) / row_int.min()

    def f(R):
        return spectral_bound(assemble_psi_R(coeffs, grid, R), tol=1e-13).s

    lo, hi = (0.0, R_hi) if bracket_hint is None else map(float, bracket_hint)
    if bracket_hint is not None and not (f(lo) < 0.0 < f(hi)):
        lo, hi = 0.0, R_hi
    return _root(f, lo, hi, tol, "find_S_star")


def spectral_bound_along_ray(coeffs: ModelCoefficients, grid: Grid, c, R: float, theta: float,
                             tol: float = DEFAULT_TOL) -> float:
    """``s(Psi_(theta c, R))``."""
    c = np.asarray(c, dtype=float)
    if np.any(c < 0) or not np.any(c > 0):
        raise PreconditionError("ray direction c must be nonnegative and not identically zero")
    if theta < 0:
        raise PreconditionError(f"theta must be nonnegative, got {theta}")
    return spectral_bound(assemble_psi_uR(coeffs, grid, theta * c, R), tol=tol).s


def delta_gamma(Gamma: float) -> float:
    """Minimum of ``x + (1 - x)**Gamma`` over [0, 1] for ``Gamma >= 1``."""
    if Gamma < 1.0:
        raise PreconditionError(f"Delta(Gamma) needs Gamma >= 1, got {Gamma}")
    if Gamma == 1.0:
        return 1.0
    return 1.0 - Gamma ** (1.0 / (1.0 - Gamma)) + Gamma ** (Gamma / (1.0 - Gamma))


def delta_minimizer(Gamma: float) -> float:
    if Gamma < 1.0:
        raise PreconditionError(f"needs Gamma >= 1, got {Gamma}")
    if Gamma == 1.0:
        return 1.0  # f_1 is constant; any point is a minimizer
    return 1.0 - Gamma ** (1.0 / (1.0 - Gamma))


def theta_star_bound(coeffs: ModelCoefficients, grid: Grid, R: float) -> float:
    """A priori L1 bound ``(r + 1) / (R * Delta(Gamma) * min beta)`` on the level set."""
    if R <= 0:
        raise PreconditionError(f"R must be positive, got {R}")
    Gamma = coeffs.bounds.Gamma
    if Gamma < 1.0:
        raise PreconditionError(f"theta* bound requires Gamma >= 1, got {Gamma}")
    bmin = float(coeffs.beta.min())
    if bmin <= 0.0:
        raise PreconditionError("theta* bound requires beta strictly positive (min beta = 0)")
    return (coeffs.bounds.r + EPSILON) / (R * delta_gamma(Gamma) * bmin)
