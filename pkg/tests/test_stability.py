import math

import numpy as np
import pytest

from strainsis import (
    Grid,
    PreconditionError,
    assemble_diffusion,
    assemble_linearization,
    assemble_psi_R,
    constant_coefficients,
    endemic_bilinear,
    endemic_fixed_point,
    find_S_star,
    leading_eigenvalues,
    mass_zero_projection,
    spectral_abscissa,
)
from strainsis.stability import conservation_eigen_residual, stability_report

import oracle_values as ov
from conftest import hetero_coefficients


def _disease_free(n=64, gamma=1.0, S=1.0):
    g = Grid(n)
    c = constant_coefficients(g, d=1.0, rho=1.0, beta=2.0, gamma=gamma)
    return g, c, assemble_linearization((0, S), c, g)


def test_disease_free_block_structure():
    g, c, L = _disease_free(gamma=1.0)
    n = g.n_cells
    assert L.a.shape == (n + 1, n + 1)
    assert np.array_equal(L.a[:n, :n], assemble_diffusion(c, g, with_reaction=True).a)
    assert np.all(L.a[:n, n] == 0.0)
    assert conservation_eigen_residual(L) <= 1e-10


def test_disease_free_bilinear_block_is_psi_S():
    g = Grid(32)
    c = hetero_coefficients(g, gamma=0.0)
    S = find_S_star(c, g)
    L = assemble_linearization((0, S), c, g)
    assert np.allclose(L.a[:32, :32], assemble_psi_R(c, g, S).a, atol=1e-13)


def test_mass_neutrality_identity(grid64):
    for gamma in (0.0, 1.0):
        c = hetero_coefficients(grid64, gamma=gamma)
        ss = endemic_bilinear(c, grid64, 2.0) if gamma == 0 else endemic_fixed_point(c, grid64, 1.2)
        L = assemble_linearization(ss, c, grid64)
        assert L.mass_functional_defect() <= 1e-12 * max(1.0, np.abs(L.a).max() * L.h)


def test_unverified_state_rejected(grid64):
    c = hetero_coefficients(grid64)
    with pytest.raises(PreconditionError, match="steady state"):
        assemble_linearization((np.full(64, 0.3), 1.0), c, grid64)


def test_projection_shape_and_idempotence():
    g, c, L = _disease_free()
    P = mass_zero_projection(L)
    assert P.n == g.n_cells and P.projected
    assert mass_zero_projection(P) is P


def test_projection_defect_error():
    g, c, L = _disease_free(n=8)
    broken = type(L)(L.a + np.eye(9) * 0.5, L.about, L.h)
    with pytest.raises(PreconditionError, match="mass-neutrality"):
        mass_zero_projection(broken)


def test_disease_free_abscissas():
    g, c, L = _disease_free(n=64)
    full = spectral_abscissa(L)
    proj = spectral_abscissa(mass_zero_projection(L))
    assert abs(full.abscissa) <= 1e-3
    assert abs(proj.abscissa + 1.0) <= 1e-3
    assert proj.converged
    assert proj.ci[0] <= proj.abscissa <= proj.ci[1]
    assert proj.method_report["perron_cross_check"] == pytest.approx(-1.0, abs=1e-9)


def test_projected_spectrum_matches_analytic_modes():
    g, c, L = _disease_free(n=128)
    ev = leading_eigenvalues(mass_zero_projection(L), k=2)
    assert np.allclose(ev.imag, 0.0, atol=1e-10)
    assert np.allclose(ev.real, ov.DISEASE_FREE_MODES_128, atol=1e-8)
    h = g.h
    for k, lam in enumerate(ev.real):
        assert abs(lam - (-1.0 - (k * math.pi) ** 2)) <= 10.0 * h**2


def test_threshold_bilinear_zero_abscissa():
    g = Grid(32)
    c = constant_coefficients(g, d=1.0, rho=1.0, beta=2.0, gamma=0.0)
    S = find_S_star(c, g)
    L = assemble_linearization((0, S), c, g)
    assert abs(spectral_abscissa(L).abscissa) <= 1e-3
    # only at S* does (0, 1) sit in the kernel
    assert np.abs(L.a[:, -1]).sum() <= 1e-10


def test_past_threshold_instability():
    g = Grid(32)
    c = constant_coefficients(g, d=1.0, rho=1.0, beta=2.0, gamma=0.0)
    L = assemble_linearization((0, 1.0), c, g)
    assert spectral_abscissa(L).abscissa == pytest.approx(2.0 * 1.0 - 1.0, abs=1e-3)


def test_heterogeneous_disease_free_is_stable_on_level_set(grid64):
    c = hetero_coefficients(grid64, gamma=1.0)
    L = assemble_linearization((0, 0.8), c, grid64)
    assert spectral_abscissa(mass_zero_projection(L)).abscissa < 0


def test_abscissa_matches_dense_eigenvalues_on_endemic_state(grid64):
    c = hetero_coefficients(grid64, gamma=1.0)
    L = assemble_linearization(endemic_fixed_point(c, grid64, 1.0), c, grid64)
    for M in (L, mass_zero_projection(L)):
        ref = np.max(np.linalg.eigvals(M.a).real)
        assert spectral_abscissa(M).abscissa == pytest.approx(ref, abs=1e-3)
    # the R row is not Metzler, so the full matrix gets no Perron cross-check
    assert L.a[-1, :-1].min() < 0
    assert "perron_cross_check" not in spectral_abscissa(L).method_report


def test_report_keys(grid64):
    c = constant_coefficients(grid64, d=1.0, rho=1.0, beta=2.0, gamma=1.0)
    rep = stability_report((0, 1.0), c, grid64, seed=3)
    assert set(rep) == {"abscissa", "abscissa_mass_zero", "conservation_eigen_residual", "fit_diagnostics"}
    again = stability_report((0, 1.0), c, grid64, seed=3)
    assert rep["abscissa_mass_zero"] == again["abscissa_mass_zero"]
