"""Endemic steady states.

Two constructions are provided:

* ``endemic_bilinear`` (gamma == 0): the susceptible level is the unique root
  ``S*`` of ``R -> s(Psi_R)``; the infected profile is any positive multiple
  of the Perron vector of ``Psi_S*``.
* ``endemic_fixed_point`` (gamma == 1, exploratory otherwise): Picard
  iteration of the ray-projection map ``phi_R`` followed by a Newton polish of
  the discrete stationary equation with ``S = R`` held fixed.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, PreconditionError, SolverError
from .grid import Grid, ModelCoefficients, State, discrete_W11_norm, l1_norm, quadrature
from .operators import apply_diffusion, assemble_psi_R, assemble_psi_uR, infection_term
from .spectral import find_S_star, spectral_bound, theta_star_bound

logger = logging.getLogger(__name__)

SOLVERS = ("bilinear", "fixed_point", "semi_trivial")
THETA_CAP = 1e12
FP_TOL = 1e-9
FP_MAX_ITER = 500
RESIDUAL_TOL = 1e-7


class ExploratoryWarning(UserWarning):
    """The solver was run outside the regime where existence is known."""


@dataclass(frozen=True)
class SteadyState:
    v_star: np.ndarray
    S_star: float
    residual_pde: float
    residual_balance: float
    solver: str
    kappa: float = math.nan
    iterations: int = 0
    exploratory: bool = False
    increments: tuple[float, ...] = field(default=(), repr=False)

    def as_state(self, grid: Grid) -> State:
        return State(v=self.v_star, S=self.S_star, t=0.0, P_star=quadrature(self.v_star, grid) + self.S_star)


def pde_residual_vector(v, S, coeffs: ModelCoefficients, grid: Grid) -> np.ndarray:
    """``(d v')' - rho v + S int beta v^(1+gamma)`` at the cell centers."""
    v = np.asarray(v, dtype=float)
    return apply_diffusion(coeffs, grid, v) - coeffs.rho * v + infection_term(v, S, coeffs, grid)


def residuals(v, S, coeffs: ModelCoefficients, grid: Grid) -> tuple[float, float]:
    """``(residual_pde, residual_balance)``: L1 norm of the stationary equation
    and the mismatch in the integrated recovery/infection balance."""
    v = np.asarray(v, dtype=float)
    res_pde = l1_norm(pde_residual_vector(v, S, coeffs, grid), grid)
    recovered = quadrature(coeffs.rho * v, grid)
    infected = quadrature(infection_term(v, S, coeffs, grid), grid)
    return res_pde, abs(recovered - infected)


def semi_trivial(S: float, grid: Grid, coeffs: ModelCoefficients) -> SteadyState:
    v = np.zeros(grid.n_cells)
    rp, rb = residuals(v, S, coeffs, grid)
    return SteadyState(v, float(S), rp, rb, "semi_trivial", kappa=0.0)


# --------------------------------------------------------------------------
# gamma == 0
# --------------------------------------------------------------------------

def endemic_bilinear(coeffs: ModelCoefficients, grid: Grid, V_star: float) -> SteadyState:
    """Endemic state with total infected mass ``V_star`` (gamma == 0)."""
    if not V_star > 0:
        raise PreconditionError(f"V_star must be positive, got {V_star}")
    S_star = find_S_star(coeffs, grid)
    res = spectral_bound(assemble_psi_R(coeffs, grid, S_star), tol=1e-13)
    v = res.eigvec * (V_star / quadrature(res.eigvec, grid))
    rp, rb = residuals(v, S_star, coeffs, grid)
    tol = RESIDUAL_TOL * (1.0 + V_star)
    if rp > tol or rb > tol:
        raise SolverError(f"bilinear steady state residuals too large: pde={rp:.3e}, balance={rb:.3e}")
    return SteadyState(v, S_star, rp, rb, "bilinear", kappa=V_star / quadrature(res.eigvec, grid),
                       iterations=res.iterations)


# --------------------------------------------------------------------------
# ray projection and fixed point
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PhiResult:
    eigvec: np.ndarray
    theta_star: float
    s_residual: float


def _ray_bound(coeffs, grid, c, R, theta):
    return spectral_bound(assemble_psi_uR(coeffs, grid, theta * c, R), tol=1e-13).s


def _theta_start(coeffs, grid, R):
    try:
        return theta_star_bound(coeffs, grid, R)
    except PreconditionError:
        # Gamma < 1 has no a priori bound; start from the same expression with Delta = 1
        bmin = float(coeffs.beta.min())
        if bmin <= 0.0:
            raise
        return (coeffs.bounds.r + 1.0) / (R * bmin)


def phi_R(c, coeffs: ModelCoefficients, grid: Grid, R: float, *, return_details: bool = False):
    """Project ``c`` along its ray onto ``{u : s(Psi_(u,R)) = 0}`` and return the
    W^{1,1}-normalized Perron vector there (``theta*`` with ``return_details``)."""
    c = np.asarray(c, dtype=float)
    if c.shape != (grid.n_cells,):
        raise ValueError(f"c must have shape ({grid.n_cells},)")
    if np.any(c < 0) or not np.any(c > 0):
        raise PreconditionError("c must be nonnegative and not identically zero")
    if not R > 0:
        raise PreconditionError(f"R must be positive, got {R}")
    if coeffs.beta.min() <= 0.0:
        raise PreconditionError("phi_R requires beta strictly positive")

    if coeffs.gamma_identically_zero:
        # u^0 == 1: the operator does not depend on c
        res = spectral_bound(assemble_psi_R(coeffs, grid, R), tol=1e-13)
        out = PhiResult(res.eigvec, math.nan, res.s)
        return out if return_details else out.eigvec

    s0 = _ray_bound(coeffs, grid, c, R, 0.0)
    if s0 >= 0.0:
        raise SolverError(f"s(Psi1) = {s0:.3g} is not negative; no zero crossing along the ray")
    hi = _theta_start(coeffs, grid, R)
    while _ray_bound(coeffs, grid, c, R, hi) <= 0.0:
        hi *= 2.0
        if hi > THETA_CAP:
            raise ConvergenceError(
                "spectral bound does not cross zero along the ray up to theta = 1e12 "
                "(gamma may lie outside the supported range)"
            )
    theta = brentq(lambda th: _ray_bound(coeffs, grid, c, R, th), 0.0, hi,
                   xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=200)
    res = spectral_bound(assemble_psi_uR(coeffs, grid, theta * c, R), tol=1e-13)
    out = PhiResult(res.eigvec, float(theta), res.s)
    return out if return_details else out.eigvec


def _newton_polish(v, R, coeffs, grid, max_iter=8):
    """Newton on F(v) = (d v')' - rho v + R int beta v^(1+gamma) = 0 with S = R fixed."""
    from .operators import assemble_diffusion

    base = assemble_diffusion(coeffs, grid, with_reaction=True).a
    h = grid.h
    best_v = v
    best = l1_norm(pde_residual_vector(v, R, coeffs, grid), grid)
    for _ in range(max_iter):
        if best <= 1e-13:
            break
        F = pde_residual_vector(best_v, R, coeffs, grid)
        w = (1.0 + coeffs.gamma) * np.where(coeffs.gamma == 0.0, 1.0, best_v ** coeffs.gamma)
        J = base + (R * h) * coeffs.beta * w[None, :]
        try:
            dv = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        cand = best_v + dv
        if cand.min() <= 0.0:
            break
        r = l1_norm(pde_residual_vector(cand, R, coeffs, grid), grid)
        if not r < best:
            break
        best_v, best = cand, r
    return best_v


def endemic_fixed_point(coeffs: ModelCoefficients, grid: Grid, R: float, c0=None, *,
                        damping: float = 1.0, tol: float = FP_TOL, max_iter: int = FP_MAX_ITER,
                        polish: bool = True) -> SteadyState:
    """Endemic state with susceptible level ``S* = R`` via Picard iteration of ``phi_R``.

    ``damping`` is the relaxation weight ``omega`` in
    ``c <- (1 - omega) c + omega phi_R(c)``.
    """
    if not R > 0:
        raise PreconditionError(f"R must be positive, got {R}")
    gamma = coeffs.gamma
    if coeffs.gamma_identically_zero:
        res = spectral_bound(assemble_psi_R(coeffs, grid, R), tol=1e-13)
        if abs(res.s) > 1e-8:
            raise PreconditionError(
                f"s(Psi_R) != 0 for gamma == 0 at this R (s = {res.s:.3e}); "
                "the only admissible R is S* (use endemic_bilinear)"
            )
        v = res.eigvec
        rp, rb = residuals(v, R, coeffs, grid)
        return SteadyState(v, float(R), rp, rb, "fixed_point", kappa=1.0, iterations=0)

    exploratory = not np.all(gamma == 1.0)
    if exploratory:
        warnings.warn(
            "endemic_fixed_point outside gamma == 1: running in exploratory mode, "
            "convergence and existence are not guaranteed",
            ExploratoryWarning,
            stacklevel=2,
        )
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")

    if c0 is None:
        c = np.ones(grid.n_cells)
    else:
        c = np.asarray(c0, dtype=float).copy()
    c = c / discrete_W11_norm(c, grid)

    increments = []
    theta = math.nan
    for k in range(1, max_iter + 1):
        out = phi_R(c, coeffs, grid, R, return_details=True)
        theta = out.theta_star
        # stop on the undamped residual ||phi_R(c) - c||; the damped step is omega times smaller
        inc = discrete_W11_norm(out.eigvec - c, grid)
        new = (1.0 - damping) * c + damping * out.eigvec
        new = new / discrete_W11_norm(new, grid)
        increments.append(inc)
        logger.debug("phi_R iteration %d: increment %.3e theta* %.6g", k, inc, theta)
        c = new
        if inc <= tol:
            break
    else:
        raise ConvergenceError(
            f"fixed-point iteration did not converge in {max_iter} iterations "
            f"(last increment {increments[-1]:.3e})",
            increments[-1],
        )

    # the converged direction has s(Psi_(theta c, R)) = 0 only up to the
    # Picard tolerance; re-project once so the eigen-relation is exact
    out = phi_R(c, coeffs, grid, R, return_details=True)
    theta = out.theta_star
    v = theta * out.eigvec
    if polish:
        v = _newton_polish(v, R, coeffs, grid)
    rp, rb = residuals(v, R, coeffs, grid)
    if rp > RESIDUAL_TOL or rb > RESIDUAL_TOL:
        raise SolverError(f"fixed-point steady state residuals too large: pde={rp:.3e}, balance={rb:.3e}")
    return SteadyState(v, float(R), rp, rb, "fixed_point", kappa=float(theta), iterations=len(increments),
                       exploratory=exploratory, increments=tuple(increments))


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VerificationReport:
    residual_pde: float
    residual_balance: float
    drift_l1: float
    pde_ok: bool
    balance_ok: bool
    dynamic_ok: bool

    @property
    def ok(self) -> bool:
        return self.pde_ok and self.balance_ok and self.dynamic_ok

    def as_dict(self) -> dict:
        return {
            "residual_pde": self.residual_pde,
            "residual_balance": self.residual_balance,
            "drift_l1": self.drift_l1,
            "pde_ok": self.pde_ok,
            "balance_ok": self.balance_ok,
            "dynamic_ok": self.dynamic_ok,
            "ok": self.ok,
        }


def verify_steady_state(ss: SteadyState, coeffs: ModelCoefficients, grid: Grid, *,
                        tol: float = RESIDUAL_TOL, drift_tol: float = 1e-6, t_end: float = 1.0,
                        dt: float = 1e-3) -> VerificationReport:
    """Recompute both residuals from scratch and check stationarity under the dynamics."""
    from .dynamics import IntegratorConfig, integrate
    from .errors import PositivityError

    rp, rb = residuals(ss.v_star, ss.S_star, coeffs, grid)
    scale = 1.0 + quadrature(np.abs(ss.v_star), grid)
    state0 = ss.as_state(grid)
    try:
        traj = integrate(state0, coeffs, grid, IntegratorConfig(dt=dt, t_end=t_end, scheme="imex_cn",
                                                                snapshot_every=10**9),
                         allow_superlinear=True)
        final = traj.final
        drift = l1_norm(final.v - state0.v, grid) + abs(final.S - state0.S)
    except (PositivityError, SolverError):
        drift = math.inf
    return VerificationReport(rp, rb, drift, rp <= tol * scale, rb <= tol * scale, drift <= drift_tol)
