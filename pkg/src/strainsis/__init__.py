"""Numerical laboratory for a strain-structured SIS model with nonlocal superlinear incidence.

    v_t = (d v_x)_x - rho v + S * int_0^1 beta(x, y) v(y)^(1 + gamma(y)) dy
    S_t = int rho v - S * int int beta v^(1 + gamma)

on x in [0, 1] with zero-flux boundaries; ``int v + S`` is conserved.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .blowup import BlowupReport, blowup_run, refinement_study
from .dynamics import IntegratorConfig, Trajectory, estimate_dt_max, integrate, step
from .errors import (
    ConvergenceError,
    PositivityError,
    PreconditionError,
    SolverError,
    StrainSISError,
    ValidationError,
)
from .grid import (
    Bounds,
    CoefficientSpec,
    Grid,
    ModelCoefficients,
    State,
    constant_coefficients,
    discrete_W11_norm,
    make_state,
    quadrature,
    sample_coefficients,
)
from .ode import (
    OdeState,
    OdeSystem,
    critical_population,
    ode_blowup_exact,
    ode_endemic_equilibria,
    ode_endemic_for_S,
    ode_from_pde,
    ode_integrate,
    ode_rhs,
)
from .operators import OperatorMatrix, assemble_diffusion, assemble_psi_R, assemble_psi_uR, infection_term
from .scenario import Scenario, load_scenario, preset_catalog, save_scenario
from .spectral import (
    SpectralResult,
    delta_gamma,
    find_S_star,
    spectral_bound,
    spectral_bound_along_ray,
    theta_star_bound,
)
from .stability import (
    LinearizationMatrix,
    assemble_linearization,
    leading_eigenvalues,
    mass_zero_projection,
    spectral_abscissa,
)
from .steady import (
    SteadyState,
    endemic_bilinear,
    endemic_fixed_point,
    phi_R,
    semi_trivial,
    verify_steady_state,
)

