"""Dense discretizations of the diffusion-reaction-integral operators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _kernels
from .errors import PreconditionError
from .grid import Grid, ModelCoefficients

KINDS = ("Psi1", "PsiR", "PsiUR", "Linearization")


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense operator matrix.

    When ``face`` (face diffusivities over ``h**2``) is given, :meth:`apply`
    evaluates the diffusion part in flux form and only the remainder densely,
    so constants are annihilated exactly instead of up to ``eps / h**2``.
    """

    a: np.ndarray
    kind: str
    meta: dict[str, Any] = field(default_factory=dict)
    face: np.ndarray | None = None
    rest: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        a = np.array(self.a, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        if self.face is not None:
            rest = a - _dense_from_face(self.face) if self.rest is None else np.array(self.rest, dtype=float)
            rest.setflags(write=False)
            object.__setattr__(self, "rest", rest)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.face is None:
            return self.a @ v
        return _kernels.flux_apply(self.face, v) + self.rest @ v

    def is_metzler(self) -> bool:
        off = self.a - np.diag(np.diag(self.a))
        return bool(off.min() >= 0.0)


def face_coefficients(coeffs: ModelCoefficients, grid: Grid) -> np.ndarray:
    """Interior-face diffusivities divided by ``h**2`` (arithmetic means).

    Boundary faces carry no flux, which is the discrete Neumann condition.
    """
    d = coeffs.d
    if d.shape[0] != grid.n_cells:
        raise ValueError("coefficients were sampled on a different grid")
    return 0.5 * (d[:-1] + d[1:]) / grid.h**2


def _dense_from_face(face) -> np.ndarray:
    n = face.shape[0] + 1
    diag = np.zeros(n)
    diag[:-1] -= face
    diag[1:] -= face
    return np.diag(diag) + np.diag(face, 1) + np.diag(face, -1)


def apply_diffusion(coeffs: ModelCoefficients, grid: Grid, v) -> np.ndarray:
    """Flux-form ``(d v')'`` at the cell centers."""
    return _kernels.flux_apply(face_coefficients(coeffs, grid), np.asarray(v, dtype=float))


def _build(kind, meta, coeffs, grid, rest) -> OperatorMatrix:
    face = face_coefficients(coeffs, grid)
    return OperatorMatrix(_dense_from_face(face) + rest, kind, meta, face, rest)


def assemble_diffusion(coeffs: ModelCoefficients, grid: Grid, with_reaction: bool = False) -> OperatorMatrix:
    """Finite-volume ``(d v')'`` with Neumann closure, optionally minus ``rho``.

    With ``with_reaction=True`` the result is the Psi1 operator.
    """
    rest = -np.diag(coeffs.rho) if with_reaction else np.zeros((grid.n_cells, grid.n_cells))
    return _build("Psi1", {"with_reaction": with_reaction}, coeffs, grid, rest)


def assemble_psi_R(coeffs: ModelCoefficients, grid: Grid, R: float) -> OperatorMatrix:
    """Psi_R = (d v')' - rho v + R * int beta(., y) v(y) dy; gamma is ignored."""
    if R < 0:
        raise PreconditionError(f"R must be nonnegative, got {R}")
    rest = -np.diag(coeffs.rho)
    if R != 0.0:
        rest += (R * grid.h) * coeffs.beta
    return _build("PsiR", {"R": float(R)}, coeffs, grid, rest)


def ray_weights(u, gamma) -> np.ndarray:
    """``u_j ** gamma_j`` with ``0 ** 0 == 1``."""
    u = np.asarray(u, dtype=float)
    return np.where(gamma == 0.0, 1.0, u ** gamma)


def assemble_psi_uR(coeffs: ModelCoefficients, grid: Grid, u, R: float) -> OperatorMatrix:
    """Psi_(u,R) = Psi1 + R * int beta(., y) u(y)^gamma(y) v(y) dy."""
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_cells,):
        raise ValueError(f"u must have shape ({grid.n_cells},)")
    if np.any(u < 0):
        raise PreconditionError("u must be nonnegative")
    if R < 0:
        raise PreconditionError(f"R must be nonnegative, got {R}")
    rest = -np.diag(coeffs.rho)
    if R != 0.0:
        rest += (R * grid.h) * coeffs.beta * ray_weights(u, coeffs.gamma)[None, :]
    return _build("PsiUR", {"R": float(R), "u": u.copy()}, coeffs, grid, rest)


def infection_term(v, S: float, coeffs: ModelCoefficients, grid: Grid) -> np.ndarray:
    """``S * int beta(x, y) |v(y)|^(1 + gamma(y)) dy`` at every cell center."""
    v = np.asarray(v, dtype=float)
    return _kernels.infection_kernel(v, float(S), coeffs.beta, coeffs.gamma, grid.h)
