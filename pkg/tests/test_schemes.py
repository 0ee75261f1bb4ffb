import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigensolve.errors import EmptyFamily
from eigensolve.grid import BoxDomain, MeshFunction, build_grid
from eigensolve.problems import build_operator, discontinuous_coefficient
from eigensolve.schemes import (Coefficients, SmoothFunction, apply, check_consistency,
                                check_homogeneity, check_positive_type, evaluate, fucik, hjb,
                                laplacian, ornstein_uhlenbeck, p_laplace_1d, pucci, quotients,
                                reflect_scheme, variable_coefficient)

UNIT = BoxDomain((0.0,), (1.0,))
SQUARE = BoxDomain.cube(0.0, 1.0, 2)


def _sampled(grid, fn):
    return MeshFunction(grid, fn(grid.points))


def _node_with_second_quotient(grid, scheme_s):
    """Mesh function on (0,1) whose second quotient at node 1 is ``scheme_s``."""
    u = np.zeros(grid.n_nodes)
    u[1] = -0.5 * scheme_s * grid.h**2
    return u


# quotients ----------------------------------------------------------------


@pytest.mark.parametrize("h", [0.5, 0.25, 0.1, 0.02])
def test_second_quotient_exact_on_quadratic(h):
    grid = build_grid(UNIT, h)
    u = _sampled(grid, lambda x: x[:, 0] ** 2)
    for node in range(grid.n_interior):
        assert quotients(grid, u, node).s[0] == pytest.approx(2.0, rel=1e-9)


def test_first_quotient_exact_on_linear():
    grid = build_grid(UNIT, 0.25)
    b = quotients(grid, _sampled(grid, lambda x: x[:, 0]), grid.slot([0.5]))
    assert b.q[0] == pytest.approx(1.0, abs=1e-15)


def test_second_quotient_of_sine():
    grid = build_grid(UNIT, 0.1)
    b = quotients(grid, _sampled(grid, lambda x: np.sin(np.pi * x[:, 0])), grid.slot([0.5]))
    assert b.s[0] == pytest.approx((2 * np.cos(0.1 * np.pi) - 2) / 0.01, rel=1e-12)
    assert b.s[0] == pytest.approx(-9.78869, abs=1e-5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_central_quotient_is_mean_of_one_sided(seed):
    grid = build_grid(SQUARE, 0.125)
    u = np.random.default_rng(seed).normal(size=grid.n_nodes)
    for node in (0, grid.n_interior // 2, grid.n_interior - 1):
        b = quotients(grid, u, node)
        assert np.array_equal(b.q, (b.forward + b.backward) / 2)


# built-in operators --------------------------------------------------------


def test_laplacian_values():
    grid = build_grid(UNIT, 0.1)
    assert np.allclose(apply(laplacian(1), grid, _sampled(grid, lambda x: x[:, 0] ** 2)), 2.0)
    grid2 = build_grid(SQUARE, 0.25)
    assert np.allclose(apply(laplacian(2), grid2,
                             _sampled(grid2, lambda x: (x**2).sum(axis=1))), 4.0)
    hat = build_grid(SQUARE, 0.5)
    assert evaluate(laplacian(2), hat, MeshFunction.from_interior(hat, [1.0]), 0) == -16.0


def test_fucik_branches():
    grid = build_grid(UNIT, 0.25)
    scheme = fucik(0.5)
    assert evaluate(scheme, grid, _node_with_second_quotient(grid, -4.0), 1) == pytest.approx(-4)
    assert evaluate(scheme, grid, _node_with_second_quotient(grid, 4.0), 1) == pytest.approx(8)


def test_variable_coefficient_matches_laplacian():
    grid = build_grid(UNIT, 0.1)
    u = np.random.default_rng(3).normal(size=grid.n_nodes)
    assert np.allclose(apply(variable_coefficient(1.0, 0.0, 0.0), grid, u),
                       apply(laplacian(1), grid, u), rtol=0, atol=1e-12)


def test_discontinuous_coefficient_jump():
    k = (2 + math.sqrt(2)) / (2 * math.sqrt(2))
    scheme = discontinuous_coefficient(k)
    jump = math.pi / (2 * k)
    x = np.array([[jump - 0.1], [jump + 0.1]])
    out = scheme.evaluator(x, np.zeros(2), np.zeros((2, 1)), -np.ones((2, 1)), 0.01)
    assert np.allclose(out, [-1.0, -2.0])


def test_ornstein_uhlenbeck_node_value():
    grid = build_grid(BoxDomain.cube(-1.0, 1.0, 2), 0.5)
    u = _sampled(grid, lambda x: 1 - x[:, 0] ** 2)
    assert evaluate(ornstein_uhlenbeck(2), grid, u, grid.slot([0.5, 0.0])) == pytest.approx(-1.5)


def test_hjb_single_family_is_variable_coefficient():
    grid = build_grid(UNIT, 0.1)
    u = np.random.default_rng(5).normal(size=grid.n_nodes)
    single = hjb([Coefficients(2.0, 1.0, -1.0)])
    assert single.is_linear
    assert np.allclose(apply(single, grid, u),
                       apply(variable_coefficient(2.0, 1.0, -1.0), grid, u), atol=1e-12)


def test_hjb_empty_family():
    with pytest.raises(EmptyFamily):
        hjb([])


def test_fucik_is_hjb_with_two_families():
    grid = build_grid(UNIT, 0.05)
    u = np.random.default_rng(1).normal(size=grid.n_nodes)
    via_hjb = hjb([Coefficients(1.0), Coefficients(2.0)], outer="sup")
    assert np.allclose(apply(fucik(0.5), grid, u), apply(via_hjb, grid, u))


def test_pucci_values():
    grid = build_grid(UNIT, 0.25)
    plus, minus = pucci(1.0, 2.0, "plus"), pucci(1.0, 2.0, "minus")
    down, up = (_node_with_second_quotient(grid, v) for v in (-4.0, 4.0))
    assert evaluate(plus, grid, down, 1) == pytest.approx(-4)
    assert evaluate(plus, grid, up, 1) == pytest.approx(8)
    assert evaluate(minus, grid, down, 1) == pytest.approx(-8)
    assert evaluate(minus, grid, up, 1) == pytest.approx(4)
    u = np.random.default_rng(2).normal(size=grid.n_nodes)
    assert np.allclose(apply(pucci(1.0, 1.0), grid, u), apply(laplacian(1), grid, u))


def test_p_laplace_values():
    grid = build_grid(UNIT, 0.5)
    hat = MeshFunction.from_interior(grid, [1.0])
    assert evaluate(p_laplace_1d(4.0), grid, hat, 0) == pytest.approx(-32.0)
    assert p_laplace_1d(4.0).homogeneity_degree == 3
    fine = build_grid(UNIT, 0.05)
    u = np.random.default_rng(4).normal(size=fine.n_nodes)
    assert np.allclose(apply(p_laplace_1d(2.0), fine, u), apply(laplacian(1), fine, u))
    assert np.allclose(apply(p_laplace_1d(4.0), fine, 2 * u),
                       8 * apply(p_laplace_1d(4.0), fine, u))


def test_reflection_identities():
    grid = build_grid(SQUARE, 0.125)
    u = np.random.default_rng(6).normal(size=grid.n_nodes)
    assert np.allclose(apply(reflect_scheme(laplacian(2)), grid, u), apply(laplacian(2), grid, u))
    assert np.allclose(apply(reflect_scheme(pucci(1.0, 2.0, "plus", 2)), grid, u),
                       apply(pucci(1.0, 2.0, "minus", 2), grid, u))
    twice = reflect_scheme(reflect_scheme(ornstein_uhlenbeck(2)))
    assert np.allclose(apply(twice, grid, u), apply(ornstein_uhlenbeck(2), grid, u))


# structural checks -----------------------------------------------------------


def test_positive_type_reports():
    report = check_positive_type(laplacian(1), build_grid(UNIT, 0.1))
    assert report.passed and report.worst_margin == pytest.approx(1.0, abs=1e-6)
    ou = check_positive_type(ornstein_uhlenbeck(2), build_grid(BoxDomain.cube(-1.0, 1.0, 2), 0.1))
    assert ou.passed and ou.worst_margin >= 0.95 - 1e-6
    bad = check_positive_type(variable_coefficient(1.0, 100.0, 0.0), build_grid(UNIT, 0.1))
    assert not bad.passed and bad.worst_margin == pytest.approx(-4.0, abs=1e-5)


@pytest.mark.parametrize("name,params,degree", [
    ("laplacian", {"dim": 2}, 1), ("fucik", {"alpha": 0.5}, 1),
    ("pucci_minus", {"a": 1, "A": 3, "dim": 2}, 1), ("p_laplace", {"p": 4}, 3)])
def test_homogeneity(name, params, degree):
    scheme = build_operator(name, params)
    grid = build_grid(BoxDomain.cube(0.0, 1.0, scheme.stencil.dim), 0.125)
    report = check_homogeneity(scheme, grid)
    assert report.passed and report.details["degree"] == degree


def test_homogeneity_detects_affine_term():
    shifted = variable_coefficient(1.0, 0.0, lambda x: np.ones(len(x)))
    assert check_homogeneity(shifted, build_grid(UNIT, 0.1)).passed
    broken = replace(hjb([Coefficients(1.0)]),
                     evaluator=lambda x, z, q, s, h: s.sum(axis=1) + 1.0)
    assert not check_homogeneity(broken, build_grid(UNIT, 0.1)).passed


def test_consistency_order_two_on_sine():
    report = check_consistency(laplacian(1), h_list=(0.1, 0.05, 0.025))
    assert report.passed
    assert all(o == pytest.approx(2.0, abs=0.02) for o in report.details["observed_order"])


def _polynomial(value, gradient, hessian):
    return SmoothFunction(value, gradient, hessian)


def test_consistency_exact_on_quadratic():
    quad = _polynomial(lambda x: x[:, 0] * (1 - x[:, 0]),
                       lambda x: (1 - 2 * x[:, :1]),
                       lambda x: np.full((len(x), 1, 1), -2.0))
    report = check_consistency(laplacian(1), test_function=quad, h_list=(0.1, 0.05))
    assert max(report.details["sup_errors"]) < 1e-10


def test_consistency_exact_for_ornstein_uhlenbeck_polynomial():
    def value(x):
        return (1 - x[:, 0] ** 2) * (1 - x[:, 1] ** 2)

    def gradient(x):
        return np.stack([-2 * x[:, 0] * (1 - x[:, 1] ** 2), -2 * x[:, 1] * (1 - x[:, 0] ** 2)], 1)

    def hessian(x):
        H = np.empty((len(x), 2, 2))
        H[:, 0, 0] = -2 * (1 - x[:, 1] ** 2)
        H[:, 1, 1] = -2 * (1 - x[:, 0] ** 2)
        H[:, 0, 1] = H[:, 1, 0] = 4 * x[:, 0] * x[:, 1]
        return H

    report = check_consistency(ornstein_uhlenbeck(2), test_function=_polynomial(
        value, gradient, hessian), h_list=(0.25, 0.125), domain=BoxDomain.cube(-1.0, 1.0, 2))
    assert max(report.details["sup_errors"]) < 1e-10


# monotonicity properties of every built-in --------------------------------------

BUILTINS = [
    ("laplacian", {"dim": 2}), ("fucik", {"alpha": 0.5, "dim": 2}),
    ("fucik", {"alpha": 3.0, "dim": 2}), ("pucci_plus", {"a": 1, "A": 2, "dim": 2}),
    ("pucci_minus", {"a": 1, "A": 2, "dim": 2}), ("ornstein_uhlenbeck", {"dim": 2}),
]


@pytest.mark.parametrize("name,params", BUILTINS)
@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_monotone_in_neighbors_and_centre(name, params, seed):
    scheme = build_operator(name, params)
    grid = build_grid(BoxDomain.cube(-1.0, 1.0, 2), 0.25)
    rng = np.random.default_rng(seed)
    u = rng.normal(size=grid.n_nodes)
    eta = rng.exponential(size=grid.n_nodes) * (rng.random(grid.n_nodes) < 0.5)
    node = int(rng.integers(grid.n_interior))
    eta[node] = 0.0
    base = evaluate(scheme, grid, u, node)
    assert evaluate(scheme, grid, u + eta, node) >= base - 1e-9 * (1 + abs(base))
    # raising z alone (without touching the quotients) never raises F
    q, s = quotients(grid, u, node).q, quotients(grid, u, node).s
    x = grid.interior_points[node: node + 1]
    tau = float(rng.exponential())
    lifted = scheme.evaluator(x, np.array([u[node] + tau]), q[None], s[None], grid.h)[0]
    assert lifted <= base + 1e-9 * (1 + abs(base))
