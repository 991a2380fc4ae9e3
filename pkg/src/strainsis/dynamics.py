"""IMEX time integration of the strain-structured SIS system.

Diffusion is implicit (tridiagonal solve), recovery and infection are
explicit. The susceptible count is recovered from the conserved total
``P* = int v + S`` after every step, so the discrete mass is exact to
roundoff; the susceptible ODE is still integrated alongside as a drift
diagnostic.

``imex_cn`` is the two-stage trapezoidal IMEX pair: a Crank-Nicolson
predictor with explicit Euler forcing, then a Crank-Nicolson corrector with
the forcing averaged over both stages (Heun). It is second order in ``dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import PositivityError, PreconditionError, SolverError, ValidationError
from .grid import Grid, ModelCoefficients, State, discrete_W11_norm, quadrature
from .operators import face_coefficients

SCHEMES = ("imex_euler", "imex_cn")
UNDERSHOOT = 1e-12


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_end: float
    scheme: str = "imex_cn"
    snapshot_every: int = 1
    positivity_floor_report: bool = True

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValidationError(f"t_end must be nonnegative, got {self.t_end}")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if int(self.snapshot_every) != self.snapshot_every or self.snapshot_every < 1:
            raise ValidationError("snapshot_every must be an integer >= 1")


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    snapshots: list[State] = field(default_factory=list)
    diagnostics: dict[str, list[float]] = field(
        default_factory=lambda: {k: [] for k in DIAGNOSTIC_KEYS}
    )

    def record(self, state: State, grid: Grid, s_drift: float) -> None:
        v = state.v
        d = self.diagnostics
        d["t"].append(state.t)
        d["S"].append(state.S)
        d["mass_error"].append(abs(quadrature(v, grid) + state.S - state.P_star))
        d["min_v"].append(float(v.min()))
        d["linf_v"].append(float(np.abs(v).max()))
        d["W11_norm"].append(discrete_W11_norm(v, grid))
        d["s_equation_drift"].append(s_drift)

    def snapshot(self, state: State) -> None:
        self.times.append(state.t)
        self.snapshots.append(state)

    @property
    def final(self) -> State:
        return self.snapshots[-1]

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {k: np.asarray(v) for k, v in self.diagnostics.items()}


DIAGNOSTIC_KEYS = ("t", "S", "mass_error", "min_v", "linf_v", "W11_norm", "s_equation_drift")


def _forcing(v, S, coeffs, grid):
    return -coeffs.rho * v + _kernels.infection_kernel(v, S, coeffs.beta, coeffs.gamma, grid.h)


def _s_rate(v, S, coeffs, grid):
    h = grid.h
    gain = h * float(coeffs.rho @ v)
    loss = h * float(_kernels.infection_kernel(v, S, coeffs.beta, coeffs.gamma, h).sum())
    return gain - loss


class _Stepper:
    """Caches the face coefficients and implicit bands for a fixed ``dt``."""

    def __init__(self, coeffs: ModelCoefficients, grid: Grid, scheme: str):
        self.coeffs = coeffs
        self.grid = grid
        self.scheme = scheme
        self.face = face_coefficients(coeffs, grid)
        self._bands_dt = None
        self._cached = None

    def advance(self, v, S, P, dt, pin_S=False):
        coeffs, grid = self.coeffs, self.grid
        F0 = _forcing(v, S, coeffs, grid)
        if self.scheme == "imex_euler":
            v_new = self.solve(dt, v + dt * F0)
        else:
            base = v + 0.5 * dt * _kernels.flux_apply(self.face, v)
            v_pred = self.solve(0.5 * dt, base + dt * F0)
            S_pred = S if pin_S else P - quadrature(v_pred, grid)
            F1 = _forcing(v_pred, S_pred, coeffs, grid)
            v_new = self.solve(0.5 * dt, base + 0.5 * dt * (F0 + F1))
        S_new = S if pin_S else P - quadrature(v_new, grid)
        return v_new, S_new

    def solve(self, c, rhs):
        if self._bands_dt != c:
            off = -c * self.face
            diag = np.ones(self.grid.n_cells)
            diag[:-1] += c * self.face
            diag[1:] += c * self.face
            self._cached = (off, diag, off.copy())
            self._bands_dt = c
        lower, diag, upper = self._cached
        x = _kernels.thomas_solve(lower, diag, upper, np.ascontiguousarray(rhs))
        if not np.all(np.isfinite(x)):
            raise SolverError("implicit diffusion solve produced non-finite values")
        return x


def _check_positivity(v_new, S_new, P, t, index=None):
    floor = -UNDERSHOOT * max(P, 1e-300)
    vmin = float(v_new.min())
    if vmin < floor:
        raise PositivityError(
            f"negative density {vmin:.3e} below -1e-12*P* at t={t:.6g}; reduce dt", index, t
        )
    if S_new < floor:
        raise PositivityError(
            f"negative susceptible count {S_new:.3e} at t={t:.6g}; reduce dt", index, t
        )


def step(state: State, coeffs: ModelCoefficients, grid: Grid, cfg: IntegratorConfig,
         *, dt: float | None = None, pin_S: bool = False, _stepper: _Stepper | None = None) -> State:
    """Advance one IMEX step.

    ``pin_S`` freezes the susceptible count (no conservation); it exists as a
    test hook that turns each cell into a pure Bernoulli ODE.
    """
    dt = cfg.dt if dt is None else dt
    stepper = _stepper or _Stepper(coeffs, grid, cfg.scheme)
    v_new, S_new = stepper.advance(state.v, state.S, state.P_star, dt, pin_S)
    t_new = state.t + dt
    _check_positivity(v_new, S_new, state.P_star, t_new)
    return State(v=v_new, S=S_new, t=t_new, P_star=state.P_star)


def integrate(state0: State, coeffs: ModelCoefficients, grid: Grid, cfg: IntegratorConfig,
              *, allow_superlinear: bool = False) -> Trajectory:
    """Integrate over a duration ``cfg.t_end``; diagnostics are recorded every step.

    Raises
    ------
    PositivityError
        With ``step_index``, ``time`` and the partial ``trajectory`` attached.
    """
    if coeffs.bounds.Gamma > 1.0 and not allow_superlinear:
        raise PreconditionError(
            f"Gamma = {coeffs.bounds.Gamma} > 1 is outside the global-existence regime; "
            "use the blow-up harness (strainsis.blowup.blowup_run)"
        )
    if state0.v.shape != (grid.n_cells,):
        raise ValueError("state does not match grid")
    traj = Trajectory()
    state = state0
    traj.snapshot(state)
    traj.record(state, grid, 0.0)
    if cfg.t_end == 0:
        return traj

    stepper = _Stepper(coeffs, grid, cfg.scheme)
    n_steps = max(1, int(math.ceil(cfg.t_end / cfg.dt - 1e-9)))
    s_ode = state.S
    rate_old = _s_rate(state.v, state.S, coeffs, grid)
    t_final = state0.t + cfg.t_end
    for k in range(1, n_steps + 1):
        if k == n_steps:
            t_target, dt = t_final, t_final - state.t
        else:
            t_target, dt = state0.t + k * cfg.dt, cfg.dt
        try:
            v_new, S_new = stepper.advance(state.v, state.S, state.P_star, dt)
            _check_positivity(v_new, S_new, state.P_star, t_target, k)
        except (PositivityError, SolverError) as exc:
            msg = f"step {k} (t={t_target:.6g}): {exc}"
            err = PositivityError(msg, k, t_target) if isinstance(exc, PositivityError) else SolverError(msg)
            err.trajectory = traj
            raise err from None
        state = State(v=v_new, S=S_new, t=t_target, P_star=state.P_star)
        rate_new = _s_rate(state.v, state.S, coeffs, grid)
        if cfg.scheme == "imex_euler":
            s_ode += dt * rate_old
        else:
            s_ode += 0.5 * dt * (rate_old + rate_new)
        rate_old = rate_new
        traj.record(state, grid, abs(s_ode - state.S))
        if k % cfg.snapshot_every == 0 or k == n_steps:
            traj.snapshot(state)
    return traj


def estimate_dt_max(state: State, coeffs: ModelCoefficients, grid: Grid) -> float:
    """Reciprocal Lipschitz-scale bound ``1 / (r + b (1 + max|v|^(1+Gamma)) max(S, 1))``."""
    bd = coeffs.bounds
    vmax = float(np.abs(state.v).max()) if state.v.size else 0.0
    denom = bd.r + bd.b * (1.0 + vmax ** (1.0 + bd.Gamma)) * max(state.S, 1.0)
    return math.inf if denom == 0.0 else 1.0 / denom
