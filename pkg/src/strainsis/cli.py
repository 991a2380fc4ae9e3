"""Command-line entry point.

Exit codes: 0 success, 1 validation or precondition error, 2 solver
nonconvergence (any partial report is still written), 64 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__  # noqa: F401  (re-exported for --version)
from .errors import ConvergenceError, PreconditionError, SolverError, StrainSISError, ValidationError
from .scenario import Scenario, get_preset, load_scenario, preset_catalog

EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGENCE, EXIT_USAGE = 0, 1, 2, 64

log = logging.getLogger("strainsis")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _add_common(p):
    p.add_argument("--scenario", default="quadratic-constant",
                   help="scenario file (.toml or .json) or preset name (default: %(default)s)")
    p.add_argument("--out-dir", default="out", help="output directory (default: %(default)s)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--n-cells", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="strainsis", description="Strain-structured SIS PDE laboratory.")
    ap.add_argument("--version", action="version", version=f"strainsis {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate the PDE and write fields/series CSV")
    _add_common(p)

    p = sub.add_parser("steady-state", help="compute an endemic steady state")
    _add_common(p)
    p.add_argument("--gamma-mode", choices=("bilinear", "fixed-point"), default=None,
                   help="default: bilinear when gamma == 0, else fixed-point")
    p.add_argument("--R", type=float, default=None, help="susceptible level for fixed-point mode")
    p.add_argument("--V-star", type=float, default=None, help="infected mass for bilinear mode")
    p.add_argument("--damping", type=float, default=1.0)

    p = sub.add_parser("spectral-scan", help="s(Psi_R) over a range of R")
    _add_common(p)
    p.add_argument("--R-min", type=float, default=0.0)
    p.add_argument("--R-max", type=float, default=2.0)
    p.add_argument("--R-count", type=int, default=21)

    p = sub.add_parser("stability", help="spectral abscissa of the linearization")
    _add_common(p)
    p.add_argument("--about", choices=("disease-free", "endemic"), default="disease-free")
    p.add_argument("--R", type=float, default=None,
                   help="S level of the disease-free state, or R for the endemic state")
    p.add_argument("--V-star", type=float, default=None)

    p = sub.add_parser("ode", help="finite-strain ODE reduction")
    _add_common(p)
    p.add_argument("--strains", type=int, default=1)
    p.add_argument("--method", choices=("rk4", "adaptive"), default="adaptive")

    p = sub.add_parser("blowup-scan", help="blow-up harness run or refinement study")
    _add_common(p)
    p.add_argument("--n-list", type=int, nargs="+", default=None)
    p.add_argument("--dt-list", type=float, nargs="+", default=None)

    p = sub.add_parser("validate", help="load and validate a scenario")
    _add_common(p)

    p = sub.add_parser("presets", help="list the preset catalog")
    p.add_argument("--out-dir", default=None, help="also write each preset as TOML here")
    return ap


def _scenario(args) -> Scenario:
    ref = args.scenario
    path = Path(ref)
    sc = load_scenario(path) if path.suffix.lower() in (".toml", ".json") or path.exists() else get_preset(ref)
    return sc.with_overrides(n_cells=args.n_cells, dt=args.dt, t_end=args.t_end, seed=args.seed)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_validate(args, out: Path) -> int:
    from .io import dumps_json, write_json

    sc = _scenario(args)
    summary = sc.validate()
    summary["seed"] = sc.seed
    write_json(out / "validate.json", summary)
    sys.stdout.write(dumps_json(summary))
    return EXIT_OK


def cmd_simulate(args, out: Path) -> int:
    from .dynamics import integrate
    from .io import write_json, write_trajectory

    sc = _scenario(args)
    grid, coeffs, state0 = sc.build()
    try:
        traj = integrate(state0, coeffs, grid, sc.integrator)
    except StrainSISError as exc:
        partial = getattr(exc, "trajectory", None)
        if partial is not None:
            write_trajectory(out, partial, grid)
        raise
    write_trajectory(out, traj, grid)
    d = traj.as_arrays()
    summary = {
        "scenario": sc.name,
        "n_cells": grid.n_cells,
        "dt": sc.integrator.dt,
        "t_end": sc.integrator.t_end,
        "scheme": sc.integrator.scheme,
        "P_star": state0.P_star,
        "S_final": traj.final.S,
        "V_final": float(traj.final.v.sum() * grid.h),
        "mass_error_max": float(d["mass_error"].max()),
        "min_v": float(d["min_v"].min()),
        "s_equation_drift_max": float(d["s_equation_drift"].max()),
        "steps": int(len(d["t"]) - 1),
    }
    write_json(out / "summary.json", summary)
    return EXIT_OK


def cmd_steady_state(args, out: Path) -> int:
    from .io import write_columns, write_json
    from .steady import endemic_bilinear, endemic_fixed_point, verify_steady_state

    sc = _scenario(args)
    grid, coeffs, _ = sc.build()
    mode = args.gamma_mode or ("bilinear" if coeffs.gamma_identically_zero else "fixed-point")
    summary = {"scenario": sc.name, "mode": mode, "n_cells": grid.n_cells}
    try:
        if mode == "bilinear":
            V = args.V_star if args.V_star is not None else float(sc.run.get("V_star", 1.0))
            ss = endemic_bilinear(coeffs, grid, V)
        else:
            R = args.R if args.R is not None else float(sc.run.get("R", 1.0))
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                ss = endemic_fixed_point(coeffs, grid, R, damping=args.damping)
            summary["warnings"] = [str(w.message) for w in caught]
    except ConvergenceError as exc:
        summary.update({"converged": False, "error": str(exc), "last_increment": exc.last_residual})
        write_json(out / "steady_state.json", summary)
        raise
    rep = verify_steady_state(ss, coeffs, grid)
    summary.update({
        "converged": True,
        "solver": ss.solver,
        "S_star": ss.S_star,
        "theta_star": ss.kappa,
        "V_star": float(ss.v_star.sum() * grid.h),
        "residual_pde": ss.residual_pde,
        "residual_balance": ss.residual_balance,
        "iterations": ss.iterations,
        "exploratory": ss.exploratory,
        "verification": rep.as_dict(),
    })
    write_columns(out / "steady_state.csv", {"x": grid.centers, "v": ss.v_star})
    write_json(out / "steady_state.json", summary)
    return EXIT_OK


def cmd_spectral_scan(args, out: Path) -> int:
    from .io import write_columns, write_json
    from .operators import assemble_psi_R
    from .spectral import find_S_star, spectral_bound

    sc = _scenario(args)
    grid, coeffs, _ = sc.build()
    if args.R_count < 1 or args.R_min < 0 or args.R_max < args.R_min:
        raise ValidationError("need R_count >= 1 and 0 <= R_min <= R_max")
    Rs = np.linspace(args.R_min, args.R_max, args.R_count)
    cols = {"R": [], "s": [], "iterations": [], "residual": []}
    for R in Rs:
        res = spectral_bound(assemble_psi_R(coeffs, grid, float(R)))
        cols["R"].append(float(R))
        cols["s"].append(res.s)
        cols["iterations"].append(res.iterations)
        cols["residual"].append(res.residual)
    write_columns(out / "spectral_scan.csv", cols)
    summary = {"scenario": sc.name, "n_cells": grid.n_cells, "R_min": args.R_min, "R_max": args.R_max,
               "R_count": args.R_count}
    if coeffs.gamma_identically_zero:
        summary["S_star"] = find_S_star(coeffs, grid)
    write_json(out / "spectral_scan.json", summary)
    return EXIT_OK


def cmd_stability(args, out: Path) -> int:
    from .io import write_json
    from .stability import stability_report
    from .steady import endemic_bilinear, endemic_fixed_point

    sc = _scenario(args)
    grid, coeffs, _ = sc.build()
    if args.about == "disease-free":
        S = args.R if args.R is not None else float(sc.run.get("R", 1.0))
        about = (0, S)
        label = {"about": "disease-free", "S": S}
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if coeffs.gamma_identically_zero:
                V = args.V_star if args.V_star is not None else float(sc.run.get("V_star", 1.0))
                about = endemic_bilinear(coeffs, grid, V)
            else:
                R = args.R if args.R is not None else float(sc.run.get("R", 1.0))
                about = endemic_fixed_point(coeffs, grid, R)
        label = {"about": "endemic", "S": about.S_star, "exploratory": True}
    report = stability_report(about, coeffs, grid, seed=sc.seed)
    report = {**report, **label, "scenario": sc.name, "n_cells": grid.n_cells}
    write_json(out / "stability.json", report)
    return EXIT_OK


def cmd_ode(args, out: Path) -> int:
    from .grid import Grid, quadrature, sample_coefficients
    from .io import write_columns, write_json
    from .ode import (OdeState, OdeSystem, critical_population, ode_endemic_equilibria, ode_from_pde,
                      ode_integrate)

    sc = _scenario(args)
    n = args.strains
    if n < 1:
        raise ValidationError("--strains must be >= 1")
    grid, coeffs, state0 = sc.build()
    summary = {"scenario": sc.name, "strains": n, "method": args.method}
    if n == 1:
        sys_ = OdeSystem.single(float(coeffs.rho.mean()), float(coeffs.beta.mean()), float(coeffs.gamma.mean()))
        st = OdeState([quadrature(state0.v, grid)], state0.S)
        P = st.total
        summary["P_star"] = P
        summary["equilibria"] = [{"V": V, "S": S} for V, S in ode_endemic_equilibria(sys_, P)]
        if sys_.gamma[0] > 0 and sys_.rho[0] > 0 and sys_.beta[0, 0] > 0:
            summary["P_bar"] = critical_population(sys_)
    else:
        g = Grid(n)
        c = sample_coefficients(sc.coefficients, g)
        _, _, s_n = sc.with_overrides(n_cells=n).build()
        sys_ = ode_from_pde(c, g)
        st = OdeState(g.h * s_n.v, s_n.S)
    traj = ode_integrate(st, sys_, sc.integrator.dt, sc.integrator.t_end, args.method)
    cols = {"t": traj.t}
    I = np.array(traj.I)
    for i in range(sys_.n_strains):
        cols[f"I_{i + 1}"] = I[:, i]
    cols["S"] = traj.S
    cols["conservation_error"] = traj.conservation_error
    write_columns(out / "ode_trajectory.csv", cols)
    summary.update({"aborted": traj.aborted, "abort_reason": traj.abort_reason, "t_final": traj.t[-1],
                    "S_final": traj.S[-1], "conservation_error_max": float(max(traj.conservation_error))})
    write_json(out / "ode.json", summary)
    return EXIT_OK


def cmd_blowup_scan(args, out: Path) -> int:
    from .blowup import BlowupAdvisory, blowup_run, refinement_study
    from .io import write_columns, write_json

    sc = _scenario(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BlowupAdvisory)
        if args.n_list or args.dt_list:
            n_list = args.n_list or [sc.n_cells]
            dt_list = args.dt_list or [sc.integrator.dt]
            rep = refinement_study(sc, n_list, dt_list)
        else:
            grid, coeffs, state0 = sc.build()
            rep = blowup_run(state0, coeffs, grid, sc.integrator)
    summary = {"scenario": sc.name, **rep.as_dict()}
    if caught:
        summary["advisory"] = summary["advisory"] or str(caught[0].message)
    write_json(out / "blowup.json", summary)
    write_columns(out / "blowup_series.csv", {"t": rep.linf_series[:, 0], "linf_v": rep.linf_series[:, 1],
                                               "mass": rep.mass_series[:, 1]})
    return EXIT_OK


def cmd_presets(args) -> int:
    from .scenario import save_scenario

    for sc in preset_catalog():
        print(f"{sc.name:24s} {sc.description}")
        if args.out_dir:
            save_scenario(sc, Path(args.out_dir) / f"{sc.name}.toml")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "steady-state": cmd_steady_state,
    "spectral-scan": cmd_spectral_scan,
    "stability": cmd_stability,
    "ode": cmd_ode,
    "blowup-scan": cmd_blowup_scan,
    "validate": cmd_validate,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    if args.command == "presets":
        return cmd_presets(args)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out)
    except (ValidationError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, SolverError) as exc:
        print(f"nonconvergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except StrainSISError as exc:  # e.g. positivity loss during simulate
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
