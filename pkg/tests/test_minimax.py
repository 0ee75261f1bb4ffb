import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigensolve.errors import NonPositiveIterate
from eigensolve.grid import BoxDomain, MeshFunction, build_grid
from eigensolve.linear_oracle import assemble_matrix, dense_spectrum
from eigensolve.minimax import (MinimaxConfig, lower_bound_certificate, objective,
                                parabola_guess, residual, solve_eigen)
from eigensolve.problems import build_operator
from eigensolve.schemes import laplacian, variable_coefficient

UNIT = BoxDomain((0.0,), (1.0,))
_PUCCI_CACHE: dict = {}
LAM_QUARTER = 64 * math.sin(math.pi / 8) ** 2  # 9.372583002030481


def _sine(grid):
    return MeshFunction(grid, np.sin(np.pi * grid.points[:, 0]))


def test_objective_single_node():
    grid = build_grid(UNIT, 0.5)
    assert objective(laplacian(1), grid, [1.0]) == pytest.approx(-8.0)


def test_objective_sine_attained_everywhere():
    grid = build_grid(UNIT, 0.25)
    w = _sine(grid)
    assert objective(laplacian(1), grid, w.interior) == pytest.approx(-LAM_QUARTER, rel=1e-14)


def test_objective_constant_guess():
    grid = build_grid(UNIT, 0.25)
    assert objective(laplacian(1), grid, np.ones(3)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), t=st.sampled_from([0.5, 3.0]))
def test_objective_scale_invariant(seed, t):
    grid = build_grid(UNIT, 0.1)
    U = np.exp(np.random.default_rng(seed).normal(size=grid.n_interior))
    for scheme in (laplacian(1), build_operator("p_laplace", {"p": 4})):
        assert objective(scheme, grid, t * U) == pytest.approx(objective(scheme, grid, U),
                                                               rel=1e-12, abs=1e-9)


def test_certificate_examples():
    grid = build_grid(UNIT, 0.5)
    phi = MeshFunction(grid, grid.points[:, 0] * (1 - grid.points[:, 0]))
    assert lower_bound_certificate(laplacian(1), grid, phi) == pytest.approx(8.0)
    fine = build_grid(UNIT, 0.1)
    assert lower_bound_certificate(laplacian(1), fine, np.ones(fine.n_nodes)) == pytest.approx(0)
    quarter = build_grid(UNIT, 0.25)
    assert lower_bound_certificate(laplacian(1), quarter, _sine(quarter)) == pytest.approx(
        LAM_QUARTER, rel=1e-13)


def test_certificate_rejects_nonpositive():
    grid = build_grid(UNIT, 0.25)
    with pytest.raises(NonPositiveIterate):
        lower_bound_certificate(laplacian(1), grid, MeshFunction.from_interior(grid, [1, 0, 1]))


def test_residual_examples():
    grid = build_grid(UNIT, 0.25)
    assert residual(laplacian(1), grid, LAM_QUARTER, _sine(grid)) <= 1e-12
    fine = build_grid(UNIT, 0.1)
    w = _sine(fine)
    gap = abs(math.pi**2 - 400 * math.sin(math.pi * 0.05) ** 2)
    assert residual(laplacian(1), fine, math.pi**2, w) == pytest.approx(gap, rel=1e-8)
    assert gap == pytest.approx(8.0908e-2, rel=1e-4)
    bump = MeshFunction(fine, parabola_guess(fine).tolist() + [0.0, 0.0])
    s = np.abs(np.diff(bump.values[np.argsort(fine.points[:, 0])], 2)).max() / 0.01
    assert residual(laplacian(1), fine, 0.0, bump) == pytest.approx(s, rel=1e-10)


def test_parabola_guess_positive_and_normalized():
    grid = build_grid(BoxDomain.cube(-1.0, 1.0, 2), 0.25)
    U = parabola_guess(grid)
    assert U.min() > 0 and U.max() == pytest.approx(1.0)


def test_solve_single_node():
    result = solve_eigen(laplacian(1), build_grid(UNIT, 0.5))
    assert result.eigenvalue == pytest.approx(8.0, abs=1e-10)
    assert result.eigenfunction.interior == pytest.approx([1.0])


def test_solve_quarter_grid_eigenpair():
    grid = build_grid(UNIT, 0.25)
    result = solve_eigen(laplacian(1), grid)
    assert result.eigenvalue == pytest.approx(LAM_QUARTER, abs=1e-8)
    assert np.abs(result.eigenfunction.values - _sine(grid).values).max() <= 1e-8
    assert result.certificate <= result.eigenvalue + 1e-8
    assert result.residual <= 1e-7
    assert not result.eigenfunction.boundary.any()


def test_solve_table_value_at_h_tenth():
    result = solve_eigen(laplacian(1), build_grid(UNIT, 0.1))
    assert abs(result.eigenvalue - math.pi**2) == pytest.approx(8.0908e-2, rel=1e-4)


def test_solve_fucik_on_zero_pi():
    grid = build_grid(BoxDomain((0.0,), (math.pi,)), math.pi / 20)
    result = solve_eigen(build_operator("fucik", {"alpha": 0.5}), grid)
    # the eigenfunction is concave, so the Laplacian branch is active
    lam_lap = (4 / grid.h**2) * math.sin(grid.h / 2) ** 2
    assert result.eigenvalue == pytest.approx(lam_lap, abs=1e-6)


def test_solve_with_drift_matches_dense_oracle():
    scheme = variable_coefficient(1.0, 2.0, -1.0)
    grid = build_grid(UNIT, 0.05)
    oracle = dense_spectrum(assemble_matrix(scheme, grid)).principal_value
    result = solve_eigen(scheme, grid)
    assert result.diagnostics["parameterization"] in ("log", "direct")
    assert result.eigenvalue == pytest.approx(oracle, abs=1e-6)


@pytest.mark.parametrize("parameterization", ["log", "direct"])
def test_parameterizations_agree(parameterization):
    grid = build_grid(UNIT, 0.1)
    result = solve_eigen(laplacian(1), grid, MinimaxConfig(parameterization=parameterization))
    assert result.eigenvalue == pytest.approx(400 * math.sin(math.pi * 0.05) ** 2, abs=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        MinimaxConfig(parameterization="newton")
    with pytest.raises(ValueError):
        MinimaxConfig(temperatures=(1.0, 1.0, 1e-7))
    with pytest.raises(ValueError):
        MinimaxConfig(temperatures=(1.0, 0.1))
    with pytest.raises(ValueError):
        MinimaxConfig(initial_guess="custom")


def test_custom_initial_guess_must_be_positive():
    grid = build_grid(UNIT, 0.25)
    with pytest.raises(NonPositiveIterate):
        solve_eigen(laplacian(1), grid, MinimaxConfig(initial_guess="custom",
                                                      initial_values=np.array([1.0, 0, 1.0])))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_certificate_never_exceeds_eigenvalue(seed):
    scheme = build_operator("pucci_plus", {"a": 1, "A": 2, "dim": 2})
    grid = build_grid(BoxDomain.cube(0.0, 1.0, 2), 0.125)
    lam = _PUCCI_CACHE.setdefault("lam", solve_eigen(scheme, grid).eigenvalue)
    rng = np.random.default_rng(seed)
    phi = np.exp(rng.normal(scale=rng.uniform(0.1, 2.0), size=grid.n_interior))
    bound = lower_bound_certificate(scheme, grid, MeshFunction.from_interior(grid, phi))
    assert bound <= lam + 1e-6


@pytest.mark.parametrize("name,params,domain,h", [
    ("laplacian", {"dim": 2}, BoxDomain.cube(0.0, 1.0, 2), 0.1),
    ("fucik", {"alpha": 2.0}, BoxDomain((0.0,), (math.pi,)), math.pi / 40),
    ("pucci_minus", {"a": 1, "A": 2, "dim": 2}, BoxDomain.cube(0.0, 1.0, 2), 0.1),
    ("ornstein_uhlenbeck", {"dim": 2}, BoxDomain.cube(-1.0, 1.0, 2), 0.2),
    ("discontinuous_example2", {}, BoxDomain((0.0,), (math.pi,)), math.pi / 40),
    ("p_laplace", {"p": 4}, UNIT, 0.05),
])
def test_residual_within_tolerance(name, params, domain, h):
    scheme = build_operator(name, params)
    result = solve_eigen(scheme, build_grid(domain, h, scheme.stencil))
    assert result.residual <= 10 * result.diagnostics["outer_tolerance"]
    assert result.certificate <= result.eigenvalue + 10 * result.diagnostics["outer_tolerance"]
    assert result.eigenfunction.interior.min() > 0
    assert result.eigenfunction.values.max() == pytest.approx(1.0)
