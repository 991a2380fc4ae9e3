"""Linearized stability about steady states.

The linearization acts on ``(w, R')``, the perturbations of ``v`` and ``S``.
Conservation makes the functional ``(h, ..., h, 1)`` a left null vector, so
``lambda = 0`` is always in the spectrum; the physically relevant spectrum is
that of the restriction to the mass-zero subspace ``h sum w + R' = 0``.

The spectral abscissa is estimated by time integration: backward Euler
iterates of random vectors grow like ``(1 - lambda dt)^(-k)`` for the
rightmost real eigenvalue, so a log-linear fit of the l1 norm returns it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import PreconditionError, StrainSISError
from .grid import Grid, ModelCoefficients, quadrature
from .operators import assemble_diffusion, ray_weights
from .spectral import spectral_bound
from .steady import RESIDUAL_TOL, SteadyState, residuals

ENSEMBLE = 8
RATE_TOL = 1e-3
MAX_DOUBLINGS = 14


@dataclass(frozen=True)
class LinearizationMatrix:
    a: np.ndarray
    about: Any
    h: float
    projected: bool = False

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def mass_functional_defect(self) -> float:
        """max |h * colsum(first n rows) + last row|, zero for exact conservation."""
        if self.projected:
            return 0.0
        a = self.a
        return float(np.abs(self.h * a[:-1].sum(axis=0) + a[-1]).max())


def _steady_parts(about, grid):
    if isinstance(about, SteadyState):
        return np.asarray(about.v_star, dtype=float), float(about.S_star)
    v, S = about
    v = np.zeros(grid.n_cells) if np.isscalar(v) and v == 0 else np.asarray(v, dtype=float)
    return v, float(S)


def assemble_linearization(about, coeffs: ModelCoefficients, grid: Grid,
                           tol: float = RESIDUAL_TOL) -> LinearizationMatrix:
    """Jacobian of the semi-discrete system at ``about``.

    ``about`` is a :class:`SteadyState` or a pair ``(v, S)``; ``(0, S)`` is the
    semi-trivial state. The point must satisfy the stationary equation.
    """
    v, S = _steady_parts(about, grid)
    if v.shape != (grid.n_cells,):
        raise ValueError("steady state does not match grid")
    if np.any(v < 0) or S < 0:
        raise PreconditionError("steady state must be nonnegative")
    rp, _ = residuals(v, S, coeffs, grid)
    if rp > tol * (1.0 + quadrature(v, grid)):
        raise PreconditionError(f"not a verified steady state (residual_pde = {rp:.3e})")

    n, h = grid.n_cells, grid.h
    beta, gamma = coeffs.beta, coeffs.gamma
    dw = (1.0 + gamma) * ray_weights(v, gamma)     # d/dv of v^(1+gamma)
    vp = np.abs(v) ** (1.0 + gamma)
    K = (S * h) * beta * dw[None, :]               # infection Jacobian in w

    a = np.zeros((n + 1, n + 1))
    a[:n, :n] = assemble_diffusion(coeffs, grid, with_reaction=True).a + K
    a[:n, n] = h * (beta @ vp)
    a[n, :n] = h * coeffs.rho - h * K.sum(axis=0)
    a[n, n] = -h * h * float(beta.sum(axis=0) @ vp)
    return LinearizationMatrix(a, about, h)


def mass_zero_projection(L: LinearizationMatrix, tol: float = 1e-10) -> LinearizationMatrix:
    """Restriction of ``L`` to ``{(w, R'): h sum w + R' = 0}`` in the coordinates ``w``.

    The basis vectors are ``(e_k, -h)``; the restricted matrix has entries
    ``L[i, k] - h L[i, n]`` for ``i, k < n``.
    """
    if L.projected:
        return L
    scale = max(1.0, float(np.abs(L.a).max()) * L.h)
    defect = L.mass_functional_defect()
    if defect > tol * scale:
        raise PreconditionError(f"mass-neutrality violated: defect {defect:.3e}")
    a = L.a
    n = L.n - 1
    P = a[:n, :n] - L.h * a[:n, n][:, None]
    return LinearizationMatrix(P, L.about, L.h, projected=True)


def conservation_eigen_residual(L: LinearizationMatrix) -> float:
    """``||L (0, ..., 0, 1)^T||_1``; zero when ``(0, 1)`` spans the conservation mode."""
    if L.projected:
        raise ValueError("conservation mode is removed by the projection")
    return float(np.abs(L.a[:, -1]).sum())


@dataclass(frozen=True)
class AbscissaResult:
    abscissa: float
    ci: tuple[float, float]
    converged: bool
    method_report: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"abscissa": self.abscissa, "ci": list(self.ci), "converged": self.converged,
                "method_report": self.method_report}


def _gershgorin_right(a: np.ndarray) -> float:
    off = np.abs(a).sum(axis=1) - np.abs(np.diag(a))
    return float((np.diag(a) + off).max())


def _pick_dt(a, dt):
    right = _gershgorin_right(a)
    if right > 0:
        dt = min(dt, 0.5 / right)
    return dt


def _ensemble_rates(lu, dt, X, n_steps):
    """Backward Euler on the columns of X; log-norm slope over the second half."""
    m = X.shape[1]
    logs = np.zeros((n_steps + 1, m))
    acc = np.zeros(m)
    Y = X.copy()
    for k in range(1, n_steps + 1):
        Y = lu_solve(lu, Y, check_finite=False)
        nrm = np.abs(Y).sum(axis=0)
        acc += np.log(nrm)
        Y /= nrm
        logs[k] = acc
    k0 = n_steps // 2
    t = dt * np.arange(k0, n_steps + 1)
    rates, ses = [], []
    for j in range(m):
        y = logs[k0:, j]
        A = np.vstack([t, np.ones_like(t)]).T
        coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
        g = coef[0]
        dof = max(len(t) - 2, 1)
        s2 = float(res[0]) / dof if res.size else 0.0
        sxx = float(((t - t.mean()) ** 2).sum())
        rates.append(g)
        ses.append(math.sqrt(s2 / sxx) if sxx > 0 else 0.0)
    return np.array(rates), np.array(ses), Y


def _lam_from_growth(g, dt):
    # one backward Euler step multiplies the mode by 1 / (1 - lambda dt) = exp(g dt)
    return (1.0 - math.exp(-g * dt)) / dt


def spectral_abscissa(L: LinearizationMatrix, tol: float = RATE_TOL, *, dt: float = 0.1,
                      seed: int = 0, ensemble: int = ENSEMBLE) -> AbscissaResult:
    """Rightmost real part of the spectrum of ``L`` from growth-rate fitting.

    Horizons are doubled until the ensemble-mean estimate moves by less than
    ``tol``; the confidence interval combines the ensemble spread and the fit
    standard errors. When the fit does not settle (e.g. an oscillating
    dominant pair) the last estimate is returned with ``converged=False``.
    """
    a = L.a if isinstance(L, LinearizationMatrix) else np.asarray(L, dtype=float)
    n = a.shape[0]
    dt = _pick_dt(a, dt)
    rng = np.random.default_rng(seed)
    X = rng.random((n, ensemble)) + 0.1
    try:
        lu = lu_factor(np.eye(n) - dt * a, check_finite=False)
    except Exception as exc:  # pragma: no cover
        return AbscissaResult(math.nan, (-math.inf, math.inf), False, {"error": str(exc)})

    n_steps = 16
    history = []
    prev = None
    converged = False
    lam = math.nan
    ci = (-math.inf, math.inf)
    for _ in range(MAX_DOUBLINGS):
        with np.errstate(all="ignore"):
            rates, ses, _ = _ensemble_rates(lu, dt, X, n_steps)
        if not np.all(np.isfinite(rates)):
            break
        lams = np.array([_lam_from_growth(g, dt) for g in rates])
        lam = float(lams.mean())
        spread = float(lams.max() - lams.min())
        se = float(ses.max()) * abs(math.exp(-rates.mean() * dt))
        half = max(spread, 2.0 * se, 1e-15 * (1.0 + abs(lam)))
        ci = (lam - half, lam + half)
        history.append({"horizon": n_steps * dt, "steps": n_steps, "estimate": lam, "spread": spread})
        if prev is not None and abs(lam - prev) <= tol and spread <= tol:
            converged = True
            break
        prev = lam
        n_steps *= 2
    if not converged:
        ci = (lam - max(1.0, abs(lam)), lam + max(1.0, abs(lam))) if math.isfinite(lam) else ci

    report: dict = {"method": "backward_euler_growth_fit", "dt": dt, "ensemble": ensemble, "seed": seed,
                    "history": history}
    off = a - np.diag(np.diag(a))
    if off.min() >= 0.0:
        try:
            res = spectral_bound(a, tol=1e-12)
            report["perron_cross_check"] = res.s
        except StrainSISError as exc:
            report["perron_cross_check"] = None
            report["perron_cross_check_error"] = str(exc)
    return AbscissaResult(lam, ci, converged, report)


def leading_eigenvalues(L: LinearizationMatrix, k: int = 2, *, dt: float = 0.1, seed: int = 0,
                        tol: float = 1e-12, max_iter: int = 5000) -> np.ndarray:
    """The ``k`` rightmost eigenvalues by subspace iteration on ``(I - dt L)^-1``.

    A block of ``k + 2`` vectors is orthonormalized each step and the
    eigenvalues are read off the small projected matrix ``Q^T L Q``. Returns
    them sorted by decreasing real part.
    """
    a = L.a if isinstance(L, LinearizationMatrix) else np.asarray(L, dtype=float)
    n = a.shape[0]
    m = min(n, k + 2)
    dt = _pick_dt(a, dt)
    lu = lu_factor(np.eye(n) - dt * a, check_finite=False)
    Q = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, m)))[0]
    prev = None
    for _ in range(max_iter):
        Q = np.linalg.qr(lu_solve(lu, Q, check_finite=False))[0]
        ritz = np.linalg.eigvals(Q.T @ a @ Q)
        ritz = ritz[np.argsort(-ritz.real)][:k]
        if prev is not None and np.all(np.abs(ritz - prev) <= tol * (1.0 + np.abs(ritz))):
            return ritz
        prev = ritz
    return prev


def stability_report(about, coeffs: ModelCoefficients, grid: Grid, *, seed: int = 0) -> dict:
    """Summary used by the ``stability`` subcommand."""
    L = assemble_linearization(about, coeffs, grid)
    full = spectral_abscissa(L, seed=seed)
    P = mass_zero_projection(L)
    proj = spectral_abscissa(P, seed=seed)
    return {
        "abscissa": full.abscissa,
        "abscissa_mass_zero": proj.abscissa,
        "conservation_eigen_residual": conservation_eigen_residual(L),
        "fit_diagnostics": {"full": full.as_dict(), "mass_zero": proj.as_dict()},
    }
