"""Scenario files and the preset catalog.

A scenario is a TOML (or JSON) document::

    name = "quadratic-constant"
    seed = 0
    [grid]
    n_cells = 128
    [integrator]
    dt = 0.001
    t_end = 5.0
    scheme = "imex_cn"
    [initial]
    S0 = 1.0
    v0 = { preset = "constant", params = { value = 0.5 } }
    [coefficients.d]
    preset = "constant"
    params = { value = 1.0 }
    ...
    [run]
    R = 1.0
"""

from __future__ import annotations

import copy
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .dynamics import IntegratorConfig
from .errors import ValidationError
from .grid import CoefficientSpec, Grid, _sample_1d, make_state, quadrature, sample_coefficients

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

_TOP_KEYS = {"name", "description", "seed", "grid", "integrator", "initial", "coefficients", "run"}


@dataclass(frozen=True)
class Scenario:
    name: str
    coefficients: CoefficientSpec
    n_cells: int
    integrator: IntegratorConfig
    initial: Mapping[str, Any]
    run: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0
    description: str = ""

    def build(self, n_cells: int | None = None):
        """``(grid, coeffs, state0)`` sampled at ``n_cells`` (default: the scenario's)."""
        grid = Grid(int(self.n_cells if n_cells is None else n_cells))
        coeffs = sample_coefficients(self.coefficients, grid)
        init = self.initial
        if "v0" not in init or "S0" not in init:
            raise ValidationError("initial section needs 'v0' and 'S0'")
        v0 = _sample_1d("v0", init["v0"], grid.centers)
        state0 = make_state(v0, float(init["S0"]), grid)
        return grid, coeffs, state0

    def validate(self) -> dict:
        """Sample everything and check the coefficient bounds; returns a summary."""
        grid, coeffs, state0 = self.build()
        return {
            "name": self.name,
            "n_cells": grid.n_cells,
            "P_star": state0.P_star,
            "V0": quadrature(state0.v, grid),
            "S0": state0.S,
            "bounds": coeffs.bounds.as_dict(),
            "gamma_identically_zero": coeffs.gamma_identically_zero,
        }

    def with_overrides(self, *, n_cells=None, dt=None, t_end=None, seed=None) -> "Scenario":
        integ = self.integrator
        if dt is not None or t_end is not None:
            integ = replace(integ, dt=integ.dt if dt is None else float(dt),
                            t_end=integ.t_end if t_end is None else float(t_end))
        return replace(self, n_cells=self.n_cells if n_cells is None else int(n_cells), integrator=integ,
                       seed=self.seed if seed is None else int(seed))

    def to_mapping(self) -> dict[str, Any]:
        integ = self.integrator
        return {
            "name": self.name,
            "description": self.description,
            "seed": self.seed,
            "grid": {"n_cells": self.n_cells},
            "integrator": {"dt": integ.dt, "t_end": integ.t_end, "scheme": integ.scheme,
                           "snapshot_every": integ.snapshot_every},
            "initial": copy.deepcopy(dict(self.initial)),
            "coefficients": self.coefficients.to_mapping(),
            "run": copy.deepcopy(dict(self.run)),
        }

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "Scenario":
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ValidationError(f"unknown scenario keys: {sorted(unknown)}")
        for key in ("coefficients", "grid", "integrator", "initial"):
            if key not in data:
                raise ValidationError(f"scenario missing section [{key}]")
        integ = dict(data["integrator"])
        try:
            cfg = IntegratorConfig(**integ)
        except TypeError as exc:
            raise ValidationError(f"bad integrator section: {exc}") from None
        n = data["grid"].get("n_cells")
        if not isinstance(n, int) or isinstance(n, bool):
            raise ValidationError("grid.n_cells must be an integer")
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ValidationError("seed must be an integer")
        return cls(
            name=str(data.get("name", "unnamed")),
            description=str(data.get("description", "")),
            seed=seed,
            n_cells=n,
            integrator=cfg,
            initial=copy.deepcopy(dict(data["initial"])),
            coefficients=CoefficientSpec.from_mapping(data["coefficients"]),
            run=copy.deepcopy(dict(data.get("run", {}))),
        )


def load_scenario(path) -> Scenario:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ValidationError(f"cannot parse {path}: {exc}") from None
    return Scenario.from_mapping(data)


def dumps_scenario(sc: Scenario, fmt: str = "toml") -> str:
    data = sc.to_mapping()
    if fmt == "json":
        return json.dumps(data, indent=2) + "\n"
    return tomli_w.dumps(data)


def save_scenario(sc: Scenario, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_scenario(sc, "json" if path.suffix.lower() == ".json" else "toml"), encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

def _const(value):
    return {"preset": "constant", "params": {"value": value}}


def _preset_data() -> list[dict]:
    integ = {"dt": 0.001, "t_end": 5.0, "scheme": "imex_cn", "snapshot_every": 500}
    return [
        {
            "name": "bilinear-constant",
            "description": "gamma = 0 with constant coefficients; S* = rho / b = 0.5",
            "grid": {"n_cells": 128},
            "integrator": dict(integ),
            "initial": {"S0": 1.0, "v0": {"preset": "cosine", "params": {"mean": 0.5, "amplitude": 0.2, "k": 1}}},
            "coefficients": {"d": _const(1.0), "rho": _const(1.0), "beta": _const(2.0), "gamma": _const(0.0)},
            "run": {"V_star": 1.0, "R": 0.5},
        },
        {
            "name": "quadratic-constant",
            "description": "gamma = 1 with constant coefficients; v* = r / (R b)",
            "grid": {"n_cells": 128},
            "integrator": dict(integ),
            "initial": {"S0": 1.0, "v0": {"preset": "cosine", "params": {"mean": 0.5, "amplitude": 0.2, "k": 1}}},
            "coefficients": {"d": _const(1.0), "rho": _const(1.0), "beta": _const(2.0), "gamma": _const(1.0)},
            "run": {"R": 1.0},
        },
        {
            "name": "heterogeneous-gamma",
            "description": "gamma(y) = y (exploratory for the fixed-point solver)",
            "grid": {"n_cells": 128},
            "integrator": dict(integ),
            "initial": {"S0": 1.0, "v0": _const(0.5)},
            "coefficients": {
                "d": {"preset": "cosine", "params": {"mean": 1.0, "amplitude": 0.2, "k": 1}},
                "rho": _const(1.0),
                "beta": _const(2.0),
                "gamma": {"preset": "linear", "params": {"a": 0.0, "b": 1.0}},
            },
            "run": {"R": 1.0},
        },
        {
            "name": "superspreader-kernel",
            "description": "beta(x, y) peaked in y near 1: high-load strains infect more",
            "grid": {"n_cells": 128},
            "integrator": dict(integ),
            "initial": {"S0": 1.0, "v0": _const(0.5)},
            "coefficients": {
                "d": _const(0.5),
                "rho": _const(1.0),
                "beta": {"preset": "peaked-y", "params": {"base": 1.0, "amplitude": 4.0, "center": 1.0,
                                                          "width": 0.1}},
                "gamma": _const(1.0),
            },
            "run": {"R": 1.0},
        },
        {
            "name": "blowup-probe",
            "description": "Gamma = 2 with a near-diagonal kernel and a localized bump",
            "grid": {"n_cells": 64},
            "integrator": {"dt": 0.01, "t_end": 1.0, "scheme": "imex_cn", "snapshot_every": 1},
            "initial": {"S0": 1.0, "v0": {"preset": "gaussian", "params": {"base": 0.5, "amplitude": 10.0,
                                                                          "center": 0.5, "width": 0.05}}},
            "coefficients": {
                "d": _const(0.01),
                "rho": _const(1.0),
                "beta": {"preset": "gaussian-kernel", "params": {"base": 0.1, "amplitude": 5.0, "width": 0.05}},
                "gamma": _const(2.0),
            },
            "run": {"n_list": [32, 64, 128], "dt_list": [0.01]},
        },
    ]


def preset_catalog() -> list[Scenario]:
    return [Scenario.from_mapping(d) for d in _preset_data()]


def get_preset(name: str) -> Scenario:
    for sc in preset_catalog():
        if sc.name == name:
            return sc
    raise ValidationError(f"unknown preset {name!r}; known: {[s.name for s in preset_catalog()]}")
