"""Cell-centered mesh on [0, 1], discrete norms and coefficient sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ValidationError


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered mesh of ``n_cells`` cells on [0, 1]."""

    n_cells: int

    def __post_init__(self) -> None:
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValidationError(f"n_cells must be an integer >= 2, got {self.n_cells!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) / self.n_cells

    @property
    def faces(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) / self.n_cells


def _check_len(f: np.ndarray, grid: Grid) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n_cells,):
        raise ValueError(f"expected array of shape ({grid.n_cells},), got {f.shape}")
    return f


def quadrature(f, grid: Grid) -> float:
    """Midpoint rule ``h * sum(f)``."""
    f = _check_len(f, grid)
    return float(grid.h * f.sum())


def derivative_samples(f, grid: Grid) -> np.ndarray:
    """Cell-wise slope: central differences inside, one-sided in the end cells."""
    f = _check_len(f, grid)
    g = np.empty_like(f)
    g[1:-1] = (f[2:] - f[:-2]) / (2.0 * grid.h)
    g[0] = (f[1] - f[0]) / grid.h
    g[-1] = (f[-1] - f[-2]) / grid.h
    return g


def discrete_W11_norm(f, grid: Grid) -> float:
    """Discrete W^{1,1} norm: midpoint integral of ``|f|`` plus that of ``|f'|``.

    The slope is taken per cell from :func:`derivative_samples`, which makes
    the norm exact on affine functions (``f(x) = x`` gives 1.5 for every n).
    """
    f = _check_len(f, grid)
    return float(grid.h * (np.abs(f).sum() + np.abs(derivative_samples(f, grid)).sum()))


def l1_norm(f, grid: Grid) -> float:
    return quadrature(np.abs(np.asarray(f, dtype=float)), grid)


# --------------------------------------------------------------------------
# Coefficients
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Bounds:
    """Upper/lower bounds on the model ingredients (``b, d0, d1, r, Gamma``)."""

    b: float
    d0: float
    d1: float
    r: float
    Gamma: float

    def as_dict(self) -> dict[str, float]:
        return {"b": self.b, "d0": self.d0, "d1": self.d1, "r": self.r, "Gamma": self.Gamma}


@dataclass(frozen=True)
class ModelCoefficients:
    """Grid samples of d, rho, beta and gamma together with their bounds.

    ``beta[i, j]`` is the transmission rate from strain ``y_j`` into strain
    ``x_i``. Arrays are made read-only on construction.
    """

    d: np.ndarray
    rho: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    bounds: Bounds = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        d = np.array(self.d, dtype=float)
        rho = np.array(self.rho, dtype=float)
        beta = np.array(self.beta, dtype=float)
        gamma = np.array(self.gamma, dtype=float)
        n = d.shape[0]
        if d.ndim != 1 or rho.shape != (n,) or gamma.shape != (n,) or beta.shape != (n, n):
            raise ValidationError(
                f"inconsistent coefficient shapes: d{d.shape} rho{rho.shape} "
                f"beta{beta.shape} gamma{gamma.shape}"
            )
        for name, arr in (("d", d), ("rho", rho), ("beta", beta), ("gamma", gamma)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite values")
        bounds = self.bounds
        if bounds is None:
            bounds = Bounds(
                b=float(beta.max()),
                d0=float(d.min()),
                d1=float(d.max()),
                r=float(rho.max()),
                Gamma=float(gamma.max()),
            )
        elif isinstance(bounds, Mapping):
            bounds = Bounds(**bounds)
        _validate(d, rho, beta, gamma, bounds)
        for arr in (d, rho, beta, gamma):
            arr.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "bounds", bounds)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def gamma_identically_zero(self) -> bool:
        return bool(np.all(self.gamma == 0.0))


def _validate(d, rho, beta, gamma, bounds: Bounds) -> None:
    if bounds.d0 <= 0.0:
        raise ValidationError(f"d0 bound must be positive, got {bounds.d0}")
    if d.min() < bounds.d0 or d.min() <= 0.0:
        raise ValidationError(f"d below d0 bound: min d = {d.min():.6g} < d0 = {bounds.d0:.6g} (need 0 < d0 <= d)")
    if d.max() > bounds.d1:
        raise ValidationError(f"d above d1 bound: max d = {d.max():.6g} > d1 = {bounds.d1:.6g}")
    if rho.min() < 0.0:
        raise ValidationError(f"rho negative: min rho = {rho.min():.6g}")
    if rho.max() > bounds.r:
        raise ValidationError(f"rho above r bound: max rho = {rho.max():.6g} > r = {bounds.r:.6g}")
    if beta.min() < 0.0:
        raise ValidationError(f"beta negative: min beta = {beta.min():.6g}")
    if beta.max() > bounds.b:
        raise ValidationError(f"beta above b bound: max beta = {beta.max():.6g} > b = {bounds.b:.6g}")
    if gamma.min() < 0.0:
        raise ValidationError(f"gamma negative: min gamma = {gamma.min():.6g}")
    if gamma.max() > bounds.Gamma:
        raise ValidationError(f"gamma above Gamma bound: max gamma = {gamma.max():.6g} > Gamma = {bounds.Gamma:.6g}")


def constant_coefficients(grid: Grid, d=1.0, rho=1.0, beta=1.0, gamma=0.0) -> ModelCoefficients:
    n = grid.n_cells
    return ModelCoefficients(
        d=np.full(n, float(d)),
        rho=np.full(n, float(rho)),
        beta=np.full((n, n), float(beta)),
        gamma=np.full(n, float(gamma)),
    )


# --------------------------------------------------------------------------
# Config-driven sampling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientSpec:
    """Declarative description of the coefficient functions.

    Each of ``d``, ``rho``, ``gamma`` is ``{"preset": name, "params": {...}}``
    or ``{"table": [[x, value], ...]}``. ``beta`` accepts a 2-D preset,
    ``{"table": [[x, y, value], ...]}`` on a tensor grid of knots, or
    ``{"separable": [spec_x, spec_y]}`` giving ``f(x) * g(y)``.
    """

    d: Mapping[str, Any]
    rho: Mapping[str, Any]
    beta: Mapping[str, Any]
    gamma: Mapping[str, Any]
    bounds: Mapping[str, float] | None = None

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "CoefficientSpec":
        missing = [k for k in ("d", "rho", "beta", "gamma") if k not in data]
        if missing:
            raise ValidationError(f"coefficient spec missing keys: {missing}")
        unknown = set(data) - {"d", "rho", "beta", "gamma", "bounds"}
        if unknown:
            raise ValidationError(f"unknown coefficient keys: {sorted(unknown)}")
        return cls(d=data["d"], rho=data["rho"], beta=data["beta"], gamma=data["gamma"],
                   bounds=data.get("bounds"))

    def to_mapping(self) -> dict[str, Any]:
        out = {"d": _plain(self.d), "rho": _plain(self.rho), "beta": _plain(self.beta),
               "gamma": _plain(self.gamma)}
        if self.bounds is not None:
            out["bounds"] = _plain(self.bounds)
        return out


def _plain(obj):
    if isinstance(obj, Mapping):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


# 1-D presets, x -> values
def _p_constant(x, value):
    return np.full_like(x, float(value))


def _p_linear(x, a=0.0, b=0.0):
    return a + b * x


def _p_cosine(x, mean=1.0, amplitude=0.0, k=1):
    return mean + amplitude * np.cos(k * math.pi * x)


def _p_gaussian(x, base=0.0, amplitude=1.0, center=0.5, width=0.1):
    return base + amplitude * np.exp(-0.5 * ((x - center) / width) ** 2)


PRESETS_1D = {
    "constant": _p_constant,
    "linear": _p_linear,
    "cosine": _p_cosine,
    "gaussian": _p_gaussian,
}


# 2-D presets, (X, Y) meshes -> values
def _k_constant(X, Y, value):
    return np.full_like(X, float(value))


def _k_gaussian_kernel(X, Y, base=0.0, amplitude=1.0, width=0.1):
    return base + amplitude * np.exp(-0.5 * ((X - Y) / width) ** 2)


def _k_peaked_y(X, Y, base=0.0, amplitude=1.0, center=1.0, width=0.1):
    return base + amplitude * np.exp(-0.5 * ((Y - center) / width) ** 2)


def _k_cosine_product(X, Y, mean=1.0, amplitude=0.0, k=1):
    return mean * (1.0 + amplitude * np.cos(k * math.pi * X) * np.cos(k * math.pi * Y))


PRESETS_2D = {
    "constant": _k_constant,
    "gaussian-kernel": _k_gaussian_kernel,
    "peaked-y": _k_peaked_y,
    "cosine-product": _k_cosine_product,
}


def _sample_1d(name: str, spec: Mapping[str, Any], x: np.ndarray) -> np.ndarray:
    if "preset" in spec:
        fn = PRESETS_1D.get(spec["preset"])
        if fn is None:
            raise ValidationError(f"{name}: unknown preset {spec['preset']!r}; known: {sorted(PRESETS_1D)}")
        try:
            return np.asarray(fn(x, **dict(spec.get("params", {}))), dtype=float)
        except TypeError as exc:
            raise ValidationError(f"{name}: bad preset params: {exc}") from None
    if "table" in spec:
        tab = np.asarray(spec["table"], dtype=float)
        if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 1:
            raise ValidationError(f"{name}: table must be a list of [x, value] pairs")
        order = np.argsort(tab[:, 0])
        xs, ys = tab[order, 0], tab[order, 1]
        if np.any(np.diff(xs) <= 0):
            raise ValidationError(f"{name}: table knots must be distinct")
        return np.interp(x, xs, ys)
    raise ValidationError(f"{name}: expected 'preset' or 'table'")


def _sample_beta(spec: Mapping[str, Any], x: np.ndarray) -> np.ndarray:
    X, Y = np.meshgrid(x, x, indexing="ij")
    if "preset" in spec:
        fn = PRESETS_2D.get(spec["preset"])
        if fn is None:
            raise ValidationError(f"beta: unknown preset {spec['preset']!r}; known: {sorted(PRESETS_2D)}")
        try:
            return np.asarray(fn(X, Y, **dict(spec.get("params", {}))), dtype=float)
        except TypeError as exc:
            raise ValidationError(f"beta: bad preset params: {exc}") from None
    if "separable" in spec:
        fx, fy = spec["separable"]
        return np.outer(_sample_1d("beta[x]", fx, x), _sample_1d("beta[y]", fy, x))
    if "table" in spec:
        tab = np.asarray(spec["table"], dtype=float)
        if tab.ndim != 2 or tab.shape[1] != 3:
            raise ValidationError("beta: table must be a list of [x, y, value] triples")
        xs = np.unique(tab[:, 0])
        ys = np.unique(tab[:, 1])
        if xs.size * ys.size != tab.shape[0]:
            raise ValidationError("beta: table knots must form a full tensor grid")
        vals = np.full((xs.size, ys.size), np.nan)
        vals[np.searchsorted(xs, tab[:, 0]), np.searchsorted(ys, tab[:, 1])] = tab[:, 2]
        if xs.size < 2 or ys.size < 2:
            raise ValidationError("beta: table needs at least two knots per axis")
        interp = RegularGridInterpolator((xs, ys), vals, method="linear", bounds_error=False, fill_value=None)
        pts = np.stack([np.clip(X, xs[0], xs[-1]), np.clip(Y, ys[0], ys[-1])], axis=-1)
        return interp(pts)
    raise ValidationError("beta: expected 'preset', 'table' or 'separable'")


def sample_coefficients(spec: CoefficientSpec | Mapping[str, Any], grid: Grid) -> ModelCoefficients:
    """Evaluate a :class:`CoefficientSpec` at the cell centers and validate bounds."""
    if not isinstance(spec, CoefficientSpec):
        spec = CoefficientSpec.from_mapping(spec)
    x = grid.centers
    return ModelCoefficients(
        d=_sample_1d("d", spec.d, x),
        rho=_sample_1d("rho", spec.rho, x),
        beta=_sample_beta(spec.beta, x),
        gamma=_sample_1d("gamma", spec.gamma, x),
        bounds=None if spec.bounds is None else Bounds(**spec.bounds),
    )


# --------------------------------------------------------------------------
# State
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class State:
    """Infected density ``v`` on the grid, susceptible count ``S`` and time ``t``."""

    v: np.ndarray
    S: float
    t: float = 0.0
    P_star: float | None = None

    def __post_init__(self) -> None:
        v = np.array(self.v, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "S", float(self.S))
        if self.P_star is None:
            object.__setattr__(self, "P_star", float(v.sum() / v.shape[0] + self.S))

    def mass(self, grid: Grid) -> float:
        return quadrature(self.v, grid) + self.S


def make_state(v, S: float, grid: Grid, t: float = 0.0) -> State:
    """Build a validated initial state; ``P_star`` is computed from the data."""
    v = _check_len(v, grid)
    if np.any(v < 0.0) or S < 0.0:
        raise ValidationError("initial data must be nonnegative")
    return State(v=v, S=S, t=t, P_star=quadrature(v, grid) + float(S))
