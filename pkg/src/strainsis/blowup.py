"""Exploration harness for the superlinear regime ``Gamma > 1``.

Nothing here asserts that solutions blow up. A run reports raw series
(``max v`` and ``int v`` against time) together with two proxies: ``max v``
exceeding ``1e8 * P_star`` and the step size underflowing ``1e-14``.

Note that with exact conservation ``max v <= P_star / h``, so on a fixed mesh
the l-infinity proxy can only trip once ``n`` is very large; refinement
studies are the meaningful evidence, through the growth of the peak with
``n`` and the drift of the extrapolated time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import IntegratorConfig, _check_positivity, _Stepper
from .errors import PositivityError, SolverError
from .grid import Grid, ModelCoefficients, State, quadrature

LINF_FACTOR = 1e8
DT_FLOOR = 1e-14
SAFETY = 0.1
FIT_WINDOW = 12
MAX_STEPS = 2_000_000


class BlowupAdvisory(UserWarning):
    """The harness was run in the global-existence regime ``Gamma <= 1``."""


@dataclass
class BlowupReport:
    blowup_suspected: bool
    t_estimate: float | None
    linf_series: np.ndarray
    mass_series: np.ndarray
    refinement_table: list[dict] = field(default_factory=list)
    reason: str = ""
    dt_min_reached: float = math.inf
    t_final: float = 0.0
    n_steps: int = 0
    conservation_max_error: float = 0.0
    advisory: str = ""
    verdict: str = ""

    def as_dict(self) -> dict:
        return {
            "blowup_suspected": self.blowup_suspected,
            "t_estimate": self.t_estimate,
            "reason": self.reason,
            "dt_min_reached": self.dt_min_reached,
            "t_final": self.t_final,
            "n_steps": self.n_steps,
            "conservation_max_error": self.conservation_max_error,
            "advisory": self.advisory,
            "verdict": self.verdict,
            "refinement_table": self.refinement_table,
        }


def adaptive_dt(v, S, coeffs: ModelCoefficients, grid: Grid, dt_base: float, safety: float = SAFETY,
                pin_S: bool = False) -> float:
    """``min(dt_base, safety / L)`` with ``L`` a local Lipschitz bound of the explicit part.

    ``L = r + b (1 + max v^Gamma) ((1 + Gamma) max(S, 1) + int v)``; it scales
    like ``max v^Gamma`` so the relative change of ``max v`` per step stays
    bounded, whereas a ``max v^(1+Gamma)`` scaling would need a number of
    steps proportional to the final peak. The ``int v`` term comes from the
    coupling through ``S = P_star - int v`` and is dropped when ``S`` is pinned.
    """
    bd = coeffs.bounds
    vmax = float(v.max())
    coupling = 0.0 if pin_S else quadrature(v, grid)
    lip = bd.r + bd.b * (1.0 + vmax ** bd.Gamma) * ((1.0 + bd.Gamma) * max(S, 1.0) + coupling)
    return dt_base if lip == 0.0 else min(dt_base, safety / lip)


def _extrapolate(ts, linf):
    """Zero of the linear fit of ``1 / max v`` against ``t`` over the final window."""
    if len(ts) < 4 or linf[-1] < 10.0 * linf[0]:
        return None
    k = min(FIT_WINDOW, len(ts))
    t = np.asarray(ts[-k:])
    y = 1.0 / np.asarray(linf[-k:])
    slope, icpt = np.polyfit(t, y, 1)
    if not slope < 0:
        return None
    return float(-icpt / slope)


def blowup_run(state0: State, coeffs: ModelCoefficients, grid: Grid, cfg: IntegratorConfig, *,
               pin_S: bool = False, safety: float = SAFETY) -> BlowupReport:
    """Integrate toward a suspected blow-up with a shrinking step.

    ``cfg.dt`` is the base step and ``cfg.t_end`` the duration. ``pin_S``
    freezes ``S`` (test hook reducing each cell to a Bernoulli equation).
    """
    advisory = ""
    if coeffs.bounds.Gamma <= 1.0:
        advisory = (f"Gamma = {coeffs.bounds.Gamma} <= 1: solutions exist globally; "
                    "dynamics.integrate is the intended entry point")
        warnings.warn(advisory, BlowupAdvisory, stacklevel=2)

    stepper = _Stepper(coeffs, grid, cfg.scheme)
    P = state0.P_star
    v, S, t = state0.v.copy(), state0.S, state0.t
    t_final = t + cfg.t_end
    ts, linf, mass = [t], [float(v.max())], [quadrature(v, grid)]
    cons = 0.0
    dt_min = math.inf
    suspected, reason = False, "reached t_end"
    n_steps = 0
    while t < t_final and n_steps < MAX_STEPS:
        dt = min(adaptive_dt(v, S, coeffs, grid, cfg.dt, safety, pin_S), t_final - t)
        while True:
            if dt < DT_FLOOR:
                suspected, reason = True, f"dt underflow below {DT_FLOOR:g} at t={t:.17g}"
                break
            try:
                with np.errstate(over="raise", invalid="raise"):
                    v_new, S_new = stepper.advance(v, S, P, dt, pin_S)
                if not pin_S:
                    _check_positivity(v_new, S_new, P, t + dt)
                elif v_new.min() < 0:
                    raise PositivityError("negative density", n_steps + 1, t + dt)
                break
            except (PositivityError, SolverError, FloatingPointError):
                dt *= 0.5
        if suspected:
            break
        dt_min = min(dt_min, dt)
        t = t + dt if t_final - t > dt else t_final
        v, S = v_new, S_new
        n_steps += 1
        ts.append(t)
        linf.append(float(v.max()))
        m = quadrature(v, grid)
        mass.append(m)
        if not pin_S:
            cons = max(cons, abs(m + S - P))
        if linf[-1] > LINF_FACTOR * P:
            suspected, reason = True, f"max v exceeded {LINF_FACTOR:g} * P_star at t={t:.17g}"
            break
    else:
        if n_steps >= MAX_STEPS:
            reason = f"step budget {MAX_STEPS} exhausted at t={t:.17g}"

    t_est = _extrapolate(ts, linf) if suspected else None
    return BlowupReport(
        blowup_suspected=suspected,
        t_estimate=t_est,
        linf_series=np.column_stack([ts, linf]),
        mass_series=np.column_stack([ts, mass]),
        reason=reason,
        dt_min_reached=dt_min,
        t_final=t,
        n_steps=n_steps,
        conservation_max_error=cons,
        advisory=advisory,
    )


def refinement_study(scenario, n_list, dt_list) -> BlowupReport:
    """Repeat :func:`blowup_run` for every ``(n, dt)`` pair.

    ``scenario`` must provide ``build(n_cells) -> (grid, coeffs, state0)`` and
    an ``integrator`` config. The returned report carries the series of the
    finest run, a row per pair in ``refinement_table`` and a verdict string.
    """
    n_list = [int(n) for n in n_list]
    dt_list = [float(d) for d in dt_list]
    if not n_list or not dt_list:
        raise ValueError("n_list and dt_list must be nonempty")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    rows, last = [], None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BlowupAdvisory)
        for n in n_list:
            grid, coeffs, state0 = scenario.build(n)
            for dt in dt_list:
                cfg = IntegratorConfig(dt=dt, t_end=scenario.integrator.t_end, scheme=scenario.integrator.scheme)
                rep = blowup_run(state0, coeffs, grid, cfg)
                rows.append({"n": n, "dt": dt, "dt_min_reached": rep.dt_min_reached,
                             "t_estimate": rep.t_estimate, "blowup_suspected": rep.blowup_suspected,
                             "linf_peak": float(rep.linf_series[:, 1].max())})
                last = rep
    last.refinement_table = rows
    last.verdict = _verdict(rows)
    last.advisory = "evidence only; the harness does not decide the blow-up question"
    return last


def _verdict(rows) -> str:
    flagged = [r for r in rows if r["blowup_suspected"]]
    if not flagged:
        peaks = [r["linf_peak"] for r in rows]
        grows = len(peaks) > 1 and peaks[-1] > 1.5 * peaks[0]
        return "no run suspects blow-up" + ("; peak grows with refinement" if grows else "")
    ests = [r["t_estimate"] for r in rows if r["t_estimate"] is not None]
    if len(flagged) < len(rows):
        return "blow-up suspected on some refinements only (inconclusive)"
    if len(ests) >= 2:
        rel = abs(ests[-1] - ests[-2]) / max(abs(ests[-1]), 1e-300)
        if rel <= 0.05:
            return "t_estimate stabilizes under refinement (evidence for blow-up)"
        if ests[-1] > ests[-2]:
            return "t_estimate recedes under refinement (evidence against blow-up)"
    return "blow-up suspected; t_estimate not stable"
