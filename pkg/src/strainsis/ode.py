"""Finite-strain and single-strain ODE reductions.

These are independent oracles for the PDE core: the system

    dI_i/dt = sum_j (d_ij I_j - d_ji I_i) - rho_i I_i + S sum_j beta_ij I_j^(1+gamma_j)
    dS/dt   = sum_i rho_i I_i - S sum_ij beta_ij I_j^(1+gamma_j)

conserves ``sum I + S`` exactly at the right-hand-side level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import PreconditionError, ValidationError

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

ADAPTIVE_TOL = 1e-10
H_FLOOR = 1e-14


@dataclass(frozen=True)
class OdeSystem:
    """Coefficients of the finite-strain system.

    The diagonal of ``d_matrix`` is ignored. ``pin_S`` freezes the
    susceptible count, which turns each strain into a Bernoulli equation
    (used to compare against closed-form blow-up times).
    """

    n_strains: int
    d_matrix: np.ndarray
    rho: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    pin_S: bool = False

    def __post_init__(self) -> None:
        n = int(self.n_strains)
        if n < 1:
            raise ValidationError("n_strains must be >= 1")
        arrays = {
            "d_matrix": (np.array(self.d_matrix, dtype=float).reshape(n, n)),
            "rho": np.array(self.rho, dtype=float).reshape(n),
            "beta": np.array(self.beta, dtype=float).reshape(n, n),
            "gamma": np.array(self.gamma, dtype=float).reshape(n),
        }
        for name, a in arrays.items():
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"{name} contains non-finite entries")
            if np.any(a < 0):
                raise ValidationError(f"{name} has negative entries")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "n_strains", n)

    @classmethod
    def single(cls, rho: float, beta: float, gamma: float, pin_S: bool = False) -> "OdeSystem":
        return cls(1, [[0.0]], [rho], [[beta]], [gamma], pin_S)


@dataclass(frozen=True)
class OdeState:
    I: np.ndarray
    S: float
    t: float = 0.0

    def __post_init__(self) -> None:
        I = np.atleast_1d(np.array(self.I, dtype=float))
        if np.any(I < 0) or self.S < 0:
            raise ValidationError("ODE state must be nonnegative")
        I.setflags(write=False)
        object.__setattr__(self, "I", I)
        object.__setattr__(self, "S", float(self.S))

    @property
    def total(self) -> float:
        return float(self.I.sum() + self.S)


@dataclass
class OdeTrajectory:
    t: list[float] = field(default_factory=list)
    I: list[np.ndarray] = field(default_factory=list)
    S: list[float] = field(default_factory=list)
    conservation_error: list[float] = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""

    @property
    def final(self) -> OdeState:
        return OdeState(np.maximum(self.I[-1], 0.0), max(self.S[-1], 0.0), self.t[-1])

    def _push(self, t, y, P0):
        self.t.append(float(t))
        self.I.append(y[:-1].copy())
        self.S.append(float(y[-1]))
        self.conservation_error.append(abs(float(y.sum()) - P0))


def _mutation(I, d):
    # sum_j d_ij I_j - I_i sum_j d_ji, diagonal cancels
    return d @ I - I * d.sum(axis=0)


def _rhs_vec(y, sys: OdeSystem):
    I, S = y[:-1], y[-1]
    w = np.abs(I) ** (1.0 + sys.gamma)
    inc = S * (sys.beta @ w)
    out = np.empty_like(y)
    dI = _mutation(I, sys.d_matrix) - sys.rho * I + inc
    out[:-1] = dI
    out[-1] = 0.0 if sys.pin_S else float(sys.rho @ I) - float(inc.sum())
    return out


def ode_rhs(state: OdeState, sys: OdeSystem) -> tuple[np.ndarray, float]:
    """``(dI/dt, dS/dt)``."""
    if state.I.shape != (sys.n_strains,):
        raise ValueError("state does not match system size")
    y = np.append(state.I, state.S)
    d = _rhs_vec(y, sys)
    return d[:-1], float(d[-1])


def _rk4(y, h, sys):
    k1 = _rhs_vec(y, sys)
    k2 = _rhs_vec(y + 0.5 * h * k1, sys)
    k3 = _rhs_vec(y + 0.5 * h * k2, sys)
    k4 = _rhs_vec(y + h * k3, sys)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _dp_step(y, h, sys, k1):
    k = [k1]
    for s in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[s], k))
        k.append(_rhs_vec(yi, sys))
    K = np.array(k)
    y5 = y + h * (_B5 @ K)
    err = h * ((_B5 - _B4) @ K)
    return y5, err, k[6]


def ode_integrate(state0: OdeState, sys: OdeSystem, dt: float, t_end: float, method: str = "rk4",
                  tol: float = ADAPTIVE_TOL) -> OdeTrajectory:
    """Integrate over ``[state0.t, state0.t + t_end]``.

    ``rk4`` uses the fixed step ``dt``. ``adaptive`` is an embedded
    Dormand-Prince 5(4) pair with mixed absolute/relative tolerance ``tol``;
    ``dt`` is the initial step. If the step size falls below ``1e-14`` or the
    state becomes non-finite, the run stops and the trajectory is marked
    ``aborted`` with the last accepted state.
    """
    if not dt > 0 or not t_end >= 0:
        raise ValidationError("dt must be positive and t_end nonnegative")
    if method not in ("rk4", "adaptive"):
        raise ValidationError(f"unknown method {method!r}")
    y = np.append(state0.I, state0.S).astype(float)
    P0 = float(y.sum())
    t0 = state0.t
    t_final = t0 + t_end
    traj = OdeTrajectory()
    traj._push(t0, y, P0)
    if t_end == 0:
        return traj

    if method == "rk4":
        n_steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
        t = t0
        for k in range(1, n_steps + 1):
            h = dt if k < n_steps else t_final - t
            y_new = _rk4(y, h, sys)
            if not np.all(np.isfinite(y_new)):
                traj.aborted, traj.abort_reason = True, f"non-finite state after t={t:.17g}"
                return traj
            y = y_new
            t = t0 + k * dt if k < n_steps else t_final
            traj._push(t, y, P0)
        return traj

    t, h = t0, min(dt, t_end)
    k1 = _rhs_vec(y, sys)
    while t < t_final:
        h = min(h, t_final - t)
        if h < H_FLOOR * max(1.0, abs(t)):
            traj.aborted, traj.abort_reason = True, f"step size underflow at t={t:.17g}"
            return traj
        with np.errstate(over="ignore", invalid="ignore"):
            y_new, err, k7 = _dp_step(y, h, sys, k1)
        scale = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        if np.all(np.isfinite(y_new)) and np.all(np.isfinite(err)):
            e = float(np.sqrt(np.mean((err / scale) ** 2)))
        else:
            e = math.inf
        if e <= 1.0:
            t = t + h if t_final - t > h else t_final
            y, k1 = y_new, k7
            traj._push(t, y, P0)
            fac = 5.0 if e == 0 else min(5.0, 0.9 * e ** -0.2)
        else:
            fac = 0.2 if not math.isfinite(e) else max(0.2, 0.9 * e ** -0.2)
        h *= fac
    return traj


# --------------------------------------------------------------------------
# single-strain closed forms
# --------------------------------------------------------------------------

def _single(sys: OdeSystem):
    if sys.n_strains != 1:
        raise PreconditionError("single-strain system required (n_strains == 1)")
    return float(sys.rho[0]), float(sys.beta[0, 0]), float(sys.gamma[0])


def critical_population(sys: OdeSystem) -> float:
    """``P_bar = (gamma rho / beta)^(1/(1+gamma)) (1 + 1/gamma)``."""
    rho, beta, gamma = _single(sys)
    if gamma <= 0 or beta <= 0 or rho <= 0:
        raise PreconditionError("P_bar needs gamma > 0, rho > 0, beta > 0")
    return (gamma * rho / beta) ** (1.0 / (1.0 + gamma)) * (1.0 + 1.0 / gamma)


def ode_endemic_equilibria(sys: OdeSystem, P_star: float) -> list[tuple[float, float]]:
    """Positive equilibria ``(V, S)`` with ``V + S = P_star``.

    For ``gamma > 0`` they solve ``V + V^(-gamma) rho / beta = P_star``; the
    left side decreases then increases with its minimum at
    ``V_c = (gamma rho / beta)^(1/(1+gamma))``, so each branch is bracketed.
    For ``gamma == 0`` every ``V`` with ``S = rho / beta`` is an equilibrium;
    the one on the level ``P_star`` is returned.
    """
    rho, beta, gamma = _single(sys)
    if beta <= 0 or rho <= 0:
        return []
    q = rho / beta
    if gamma == 0.0:
        V = P_star - q
        return [(V, q)] if V > 0 else []

    def g(V):
        return V + q * V ** (-gamma) - P_star

    Vc = (gamma * q) ** (1.0 / (1.0 + gamma))
    gmin = g(Vc)
    scale = max(1.0, P_star)
    if abs(gmin) <= 1e-14 * scale:
        return [(Vc, P_star - Vc)]
    if gmin > 0:
        return []
    out = []
    # left branch: g -> +inf as V -> 0
    lo = Vc
    while g(lo) <= 0:
        lo *= 0.5
    out.append(brentq(g, lo, Vc, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))
    # right branch: g(V) >= V - P_star
    hi = max(P_star, Vc) * 2.0
    out.append(brentq(g, Vc, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))
    return [(V, P_star - V) for V in out]


def ode_endemic_for_S(sys: OdeSystem, S: float) -> tuple[float, float]:
    """``(V, S)`` with ``V = (rho / (beta S))^(1/gamma)``."""
    rho, beta, gamma = _single(sys)
    if not S > 0:
        raise PreconditionError(f"S must be positive, got {S}")
    if gamma <= 0:
        raise PreconditionError("ode_endemic_for_S needs gamma > 0")
    if beta <= 0:
        raise PreconditionError("ode_endemic_for_S needs beta > 0")
    return (rho / (beta * S)) ** (1.0 / gamma), float(S)


def ode_blowup_exact(rho: float, beta: float, p: float, v0: float) -> float | None:
    """Blow-up time of ``v' = -rho v + beta v^p``, or ``None`` if the solution decays."""
    if not p > 1:
        raise PreconditionError(f"blow-up needs p > 1, got {p}")
    if not v0 > 0 or not beta > 0:
        raise PreconditionError("needs v0 > 0 and beta > 0")
    growth = beta * v0 ** (p - 1.0)
    if rho == 0.0:
        return 1.0 / ((p - 1.0) * growth)
    if growth <= rho:
        return None
    return -math.log1p(-rho / growth) / (rho * (p - 1.0))


# --------------------------------------------------------------------------
# PDE-consistent finite-strain system
# --------------------------------------------------------------------------

def ode_from_pde(coeffs, grid) -> OdeSystem:
    """Nearest-neighbour system whose dynamics equal the semi-discrete PDE.

    With ``I_i = h v_i`` the mutation rates are the face diffusivities over
    ``h**2`` and ``beta_ij`` is rescaled by ``h^(1 - gamma_j)``.
    """
    from .operators import face_coefficients

    n, h = grid.n_cells, grid.h
    face = face_coefficients(coeffs, grid)
    d = np.zeros((n, n))
    idx = np.arange(n - 1)
    d[idx, idx + 1] = face
    d[idx + 1, idx] = face
    beta = coeffs.beta * h ** (1.0 - coeffs.gamma)[None, :]
    return OdeSystem(n, d, coeffs.rho, beta, coeffs.gamma)
