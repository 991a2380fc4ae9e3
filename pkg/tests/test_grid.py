import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from strainsis import (
    CoefficientSpec,
    Grid,
    ModelCoefficients,
    ValidationError,
    constant_coefficients,
    discrete_W11_norm,
    make_state,
    quadrature,
    sample_coefficients,
)
from strainsis.grid import Bounds, derivative_samples, l1_norm

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_grid_invariants():
    for n in (2, 3, 7, 100, 1024):
        g = Grid(n)
        assert abs(g.h * n - 1.0) <= np.finfo(float).eps
        c = g.centers
        assert np.all(np.diff(c) > 0) and c[0] > 0 and c[-1] < 1
        assert np.allclose(c, (np.arange(n) + 0.5) / n)
        assert g.faces[0] == 0.0 and g.faces[-1] == 1.0


@pytest.mark.parametrize("n", [0, 1, 2.5, -3])
def test_grid_rejects_small_or_fractional(n):
    with pytest.raises(ValidationError):
        Grid(n)


def test_quadrature_closed_forms():
    for n in (2, 10, 100):
        g = Grid(n)
        assert quadrature(np.ones(n), g) == pytest.approx(1.0, abs=1e-15)
        assert quadrature(np.zeros(n), g) == 0.0
    g = Grid(100)
    assert abs(quadrature(g.centers, g) - 0.5) <= 1e-12


def test_quadrature_length_mismatch():
    with pytest.raises(ValueError):
        quadrature(np.ones(5), Grid(4))


def test_quadrature_second_order():
    # midpoint error for x^2 is exactly h^2 / 12
    errs = []
    for n in (16, 32, 64, 128):
        g = Grid(n)
        err = abs(quadrature(np.cos(3 * g.centers), g) - math.sin(3) / 3)
        errs.append(err)
        assert quadrature(g.centers**2, g) == pytest.approx(1 / 3 - g.h**2 / 12, abs=1e-15)
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.05)


def test_w11_closed_forms():
    g = Grid(100)
    assert discrete_W11_norm(np.full(100, 3.0), g) == pytest.approx(3.0, abs=1e-14)
    assert discrete_W11_norm(np.zeros(100), g) == 0.0
    assert abs(discrete_W11_norm(g.centers, g) - 1.5) <= 1e-12
    # affine exactness holds on every mesh
    for n in (2, 5, 33):
        gg = Grid(n)
        assert abs(discrete_W11_norm(2.0 + 3.0 * gg.centers, gg) - (3.5 + 3.0)) <= 1e-12


def test_w11_converges_for_smooth_functions():
    # int |cos(pi x)| + int |pi sin(pi x)| = 2/pi + 2
    exact = 2 / math.pi + 2
    errs = [abs(discrete_W11_norm(np.cos(np.pi * Grid(n).centers), Grid(n)) - exact) for n in (32, 64, 128)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_derivative_samples_affine():
    g = Grid(9)
    assert np.allclose(derivative_samples(4.0 * g.centers - 1.0, g), 4.0)


@settings(max_examples=60, deadline=None)
@given(arrays(float, 16, elements=finite), arrays(float, 16, elements=finite), st.floats(0, 50))
def test_quadrature_linear_monotone_and_w11_homogeneous(f, g_, theta):
    g = Grid(16)
    assert quadrature(f + g_, g) == pytest.approx(quadrature(f, g) + quadrature(g_, g), abs=1e-9)
    lo, hi = np.minimum(f, g_), np.maximum(f, g_)
    assert quadrature(lo, g) <= quadrature(hi, g) + 1e-12
    assert discrete_W11_norm(theta * f, g) == pytest.approx(theta * discrete_W11_norm(f, g), rel=1e-12, abs=1e-9)
    assert discrete_W11_norm(f, g) >= l1_norm(f, g) - 1e-12


def test_constant_preset_sampling():
    g = Grid(8)
    spec = {
        "d": {"preset": "constant", "params": {"value": 1.0}},
        "rho": {"preset": "constant", "params": {"value": 1.0}},
        "beta": {"preset": "constant", "params": {"value": 2.0}},
        "gamma": {"preset": "constant", "params": {"value": 0.0}},
    }
    c = sample_coefficients(spec, g)
    assert np.all(c.d == 1.0) and np.all(c.rho == 1.0) and np.all(c.beta == 2.0) and np.all(c.gamma == 0.0)
    assert c.bounds == Bounds(b=2.0, d0=1.0, d1=1.0, r=1.0, Gamma=0.0)
    assert c.gamma_identically_zero


def test_negative_d_rejected_citing_d0():
    g = Grid(8)
    with pytest.raises(ValidationError, match="d0"):
        ModelCoefficients(d=np.full(8, -1.0), rho=np.ones(8), beta=np.ones((8, 8)), gamma=np.zeros(8))
    with pytest.raises(ValidationError, match="d below d0 bound"):
        ModelCoefficients(d=np.full(8, 0.5), rho=np.ones(8), beta=np.ones((8, 8)), gamma=np.zeros(8),
                          bounds={"b": 1.0, "d0": 1.0, "d1": 1.0, "r": 1.0, "Gamma": 0.0})
    with pytest.raises(ValidationError, match="d0"):
        sample_coefficients({"d": {"preset": "constant", "params": {"value": -1.0}},
                             "rho": {"preset": "constant", "params": {"value": 1.0}},
                             "beta": {"preset": "constant", "params": {"value": 1.0}},
                             "gamma": {"preset": "constant", "params": {"value": 0.0}}}, g)


@pytest.mark.parametrize("field, bad, msg", [
    ("rho", -0.1, "rho negative"),
    ("beta", -0.1, "beta negative"),
    ("gamma", -0.1, "gamma negative"),
])
def test_negative_coefficients_rejected(field, bad, msg):
    kw = dict(d=np.ones(4), rho=np.ones(4), beta=np.ones((4, 4)), gamma=np.zeros(4))
    kw[field] = np.full_like(kw[field], bad)
    with pytest.raises(ValidationError, match=msg):
        ModelCoefficients(**kw)


def test_shape_and_finiteness_validation():
    with pytest.raises(ValidationError, match="shapes"):
        ModelCoefficients(d=np.ones(4), rho=np.ones(3), beta=np.ones((4, 4)), gamma=np.zeros(4))
    with pytest.raises(ValidationError, match="non-finite"):
        ModelCoefficients(d=np.ones(4), rho=np.array([1, np.nan, 1, 1.0]), beta=np.ones((4, 4)), gamma=np.zeros(4))


def test_coefficients_are_read_only():
    c = constant_coefficients(Grid(4))
    with pytest.raises(ValueError):
        c.d[0] = 5.0


def test_tabulated_rho_piecewise_linear():
    # rho knots (0, 0), (0.5, 1), (1, 0.5); hand-evaluated at the centers of n = 8
    g = Grid(8)
    spec = {
        "d": {"preset": "constant", "params": {"value": 1.0}},
        "rho": {"table": [[0.0, 0.0], [0.5, 1.0], [1.0, 0.5]]},
        "beta": {"preset": "constant", "params": {"value": 1.0}},
        "gamma": {"preset": "constant", "params": {"value": 0.0}},
    }
    c = sample_coefficients(spec, g)
    expected = [0.125, 0.375, 0.625, 0.875, 0.9375, 0.8125, 0.6875, 0.5625]
    assert np.allclose(c.rho, expected, atol=1e-15)


def test_beta_table_and_separable():
    g = Grid(6)
    base = {"d": {"preset": "constant", "params": {"value": 1.0}},
            "rho": {"preset": "constant", "params": {"value": 1.0}},
            "gamma": {"preset": "constant", "params": {"value": 1.0}}}
    tab = [[x, y, 1.0 + x + 2 * y] for x in (0.0, 1.0) for y in (0.0, 1.0)]
    c = sample_coefficients({**base, "beta": {"table": tab}}, g)
    X, Y = np.meshgrid(g.centers, g.centers, indexing="ij")
    assert np.allclose(c.beta, 1.0 + X + 2 * Y, atol=1e-14)
    sep = {"separable": [{"preset": "linear", "params": {"a": 1.0, "b": 1.0}}, {"preset": "constant",
                                                                                  "params": {"value": 2.0}}]}
    c = sample_coefficients({**base, "beta": sep}, g)
    assert np.allclose(c.beta, 2.0 * (1.0 + X), atol=1e-14)


def test_unknown_preset_and_missing_keys():
    g = Grid(4)
    with pytest.raises(ValidationError, match="unknown preset"):
        sample_coefficients({"d": {"preset": "nope"}, "rho": {}, "beta": {}, "gamma": {}}, g)
    with pytest.raises(ValidationError, match="missing"):
        CoefficientSpec.from_mapping({"d": {}})


def test_make_state_and_mass():
    g = Grid(10)
    s = make_state(np.full(10, 0.5), 1.0, g)
    assert s.P_star == pytest.approx(1.5)
    assert s.mass(g) == pytest.approx(1.5)
    with pytest.raises(ValidationError):
        make_state(-np.ones(10), 1.0, g)
    with pytest.raises(ValidationError):
        make_state(np.ones(10), -1.0, g)
