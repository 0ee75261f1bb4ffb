"""Randomized property suites for built-in and user schemes.

Every suite draws its instances from ``numpy.random.default_rng(seed)`` and
returns a :class:`~eigensolve.schemes.CheckReport`; ``run_validation``
bundles the suites that apply to a scheme.
"""

from __future__ import annotations

import math

import numpy as np

from .dirichlet import DirichletProblem, monotone_iteration, shifted_scheme, solve_dirichlet
from .errors import EigensolveError, MonotonicityViolation
from .grid import BoxDomain, Grid, MeshFunction, build_grid
from .minimax import lower_bound_certificate, solve_eigen
from .problems import build_operator
from .schemes import (CheckReport, SchemeSpec, apply, check_consistency, check_homogeneity,
                      check_positive_type, reflect_scheme)

INSTANCES = 100


def _positive(rng, size):
    return rng.exponential(size=size)


def _safe(name, fn):
    try:
        return fn()
    except EigensolveError as exc:
        return CheckReport(name, False, details={"error": f"{type(exc).__name__}: {exc}"})


def check_maximum_principle(scheme: SchemeSpec, grid: Grid, instances: int = INSTANCES,
                            seed=0) -> CheckReport:
    """``F_h[u] >= 0`` inside and ``u <= 0`` on the boundary imply ``u <= 0``.

    Test functions are Dirichlet solutions with random ``f >= 0`` and
    ``g <= 0``; the hypothesis is re-verified by evaluating ``F_h[u]``.
    """
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(instances):
        f = _positive(rng, grid.n_interior) * (rng.random(grid.n_interior) < 0.8)
        g = -_positive(rng, grid.n_boundary)
        u = solve_dirichlet(DirichletProblem(scheme, grid, f, g)).values
        scale = max(1.0, float(np.abs(u).max()))
        if apply(scheme, grid, u).min() < -1e-8 * scale * grid.h**-2:
            raise EigensolveError("Dirichlet solution violates F_h[u] >= 0")
        worst = max(worst, float(u.max()) / scale)
    return CheckReport("maximum_principle", worst <= 1e-9, worst,
                       {"instances": instances, "max_scaled_u": worst})


def check_comparison(scheme: SchemeSpec, grid: Grid, instances: int = INSTANCES,
                     seed=0) -> CheckReport:
    """``f_1 <= f_2`` with equal boundary data gives ``u_1 >= u_2``."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(instances):
        f1 = rng.normal(size=grid.n_interior)
        f2 = f1 + _positive(rng, grid.n_interior) * (rng.random(grid.n_interior) < 0.5)
        g = rng.normal(size=grid.n_boundary)
        u1 = solve_dirichlet(DirichletProblem(scheme, grid, f1, g)).values
        u2 = solve_dirichlet(DirichletProblem(scheme, grid, f2, g)).values
        scale = max(1.0, float(np.abs(u1).max()), float(np.abs(u2).max()))
        worst = max(worst, float((u2 - u1).max()) / scale)
    return CheckReport("comparison", worst <= 1e-9, worst,
                       {"instances": instances, "max_scaled_excess": worst})


def check_threshold_maximum_principle(scheme: SchemeSpec, grid: Grid, lam: float,
                                      fraction: float = 0.9, instances: int = INSTANCES,
                                      seed=0) -> CheckReport:
    """Below the eigenvalue, ``F_h[u] + tau u = f >= 0`` with ``u <= 0`` on
    the boundary still forces ``u <= 0``; tested at ``tau = fraction * lam``."""
    rng = np.random.default_rng(seed)
    tau = fraction * lam
    shifted = shifted_scheme(scheme, tau)
    worst = -np.inf
    for _ in range(instances):
        f = _positive(rng, grid.n_interior) * (rng.random(grid.n_interior) < 0.8)
        g = -_positive(rng, grid.n_boundary)
        u = solve_dirichlet(DirichletProblem(shifted, grid, f, g)).values
        worst = max(worst, float(u.max()) / max(1.0, float(np.abs(u).max())))
    return CheckReport("threshold_maximum_principle", worst <= 1e-9, worst,
                       {"instances": instances, "tau": tau, "max_scaled_u": worst})


def check_certificate(scheme: SchemeSpec, grid: Grid, lam: float, instances: int = INSTANCES,
                      seed=0) -> CheckReport:
    """Every positive ``phi`` gives ``-max F_h[phi] / phi^d <= lambda_h``."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(instances):
        phi = np.exp(rng.normal(scale=rng.uniform(0.1, 2.0), size=grid.n_interior))
        bound = lower_bound_certificate(scheme, grid, MeshFunction.from_interior(grid, phi))
        worst = max(worst, bound - lam)
    tol = 1e-8 * (1 + abs(lam))
    return CheckReport("certificate_soundness", worst <= tol, worst,
                       {"instances": instances, "max_bound_minus_lambda": worst})


def check_monotone_iteration(scheme: SchemeSpec, grid: Grid, lam: float) -> CheckReport:
    """Nondecreasing, convergent iterates at ``lam / 2``; divergence at ``1.5 lam``."""
    try:
        below = monotone_iteration(scheme, grid, 0.5 * lam, early_exit=False)
        above = monotone_iteration(scheme, grid, 1.5 * lam)
    except MonotonicityViolation as exc:
        return CheckReport("monotone_iteration", False, details={"error": str(exc)})
    passed = below.converged and not above.converged
    return CheckReport("monotone_iteration", passed,
                       details={"below_steps": below.steps, "above_steps": above.steps,
                                "above_reason": getattr(above, "reason", "converged")})


def check_pucci_reflection(a: float = 1.0, A: float = 2.0, dim: int = 2,
                           h: float = 0.1, tol: float = 1e-8) -> CheckReport:
    """Reflecting the maximal Pucci operator gives the minimal one."""
    grid = build_grid(BoxDomain.cube(0.0, 1.0, dim), h)
    lam_reflected = solve_eigen(reflect_scheme(build_operator(
        "pucci_plus", {"a": a, "A": A, "dim": dim})), grid).eigenvalue
    lam_minus = solve_eigen(build_operator("pucci_minus", {"a": a, "A": A, "dim": dim}),
                            grid).eigenvalue
    diff = abs(lam_reflected - lam_minus)
    return CheckReport("pucci_reflection", diff <= tol, diff,
                       {"reflected": lam_reflected, "minus": lam_minus})


def check_scaling(dim: int = 1, cells: int = 10, radii=(0.5, 1.0, 2.0, 3.0),
                  rtol: float = 1e-10) -> CheckReport:
    """``lambda_h R^2`` is the same on ``(0, R)^n`` when ``h / R`` is fixed."""
    scheme = build_operator("laplacian", {"dim": dim})
    values = [solve_eigen(scheme, build_grid(BoxDomain.cube(0.0, R, dim), R / cells)).eigenvalue
              * R**2 for R in radii]
    spread = (max(values) - min(values)) / abs(values[0])
    return CheckReport("scaling", spread <= rtol, spread, {"lambda_R2": values[0]})


def builtin_cases() -> list[tuple[str, SchemeSpec, Grid]]:
    """Every registered operator on a small grid where it is of positive type."""
    unit1, unit2 = BoxDomain.cube(0.0, 1.0, 1), BoxDomain.cube(0.0, 1.0, 2)
    drift = {"a": [1.0], "b": [2.0], "c": -1.0}
    cases = [
        ("laplacian_1d", build_operator("laplacian", {"dim": 1}), build_grid(unit1, 0.1)),
        ("laplacian_2d", build_operator("laplacian", {"dim": 2}), build_grid(unit2, 0.125)),
        ("variable_coefficient", build_operator("variable_coefficient", drift),
         build_grid(unit1, 0.1)),
        ("discontinuous_example2", build_operator("discontinuous_example2"),
         build_grid(BoxDomain((0.0,), (math.pi,)), math.pi / 20)),
        ("fucik_half", build_operator("fucik", {"alpha": 0.5}),
         build_grid(BoxDomain((0.0,), (math.pi,)), math.pi / 20)),
        ("fucik_two", build_operator("fucik", {"alpha": 2.0}),
         build_grid(BoxDomain((0.0,), (math.pi,)), math.pi / 20)),
        ("pucci_plus", build_operator("pucci_plus", {"a": 1.0, "A": 2.0, "dim": 2}),
         build_grid(unit2, 0.125)),
        ("pucci_minus", build_operator("pucci_minus", {"a": 1.0, "A": 2.0, "dim": 2}),
         build_grid(unit2, 0.125)),
        ("p_laplace", build_operator("p_laplace", {"p": 4.0}), build_grid(unit1, 0.125)),
        ("ornstein_uhlenbeck", build_operator("ornstein_uhlenbeck", {"dim": 2}),
         build_grid(BoxDomain.cube(-1.0, 1.0, 2), 0.25)),
        ("hjb", build_operator("hjb", {"families": [{"a": 1.0, "b": 1.0}, {"a": 2.0, "b": -1.0}],
                                        "outer": "sup"}), build_grid(unit1, 0.1)),
    ]
    return cases


def run_validation(scheme: SchemeSpec, grid: Grid, instances: int = INSTANCES, seed=0,
                   consistency_domain: BoxDomain | None = None) -> list[CheckReport]:
    """All property suites applicable to ``scheme`` on ``grid``."""
    reports = [check_positive_type(scheme, grid, seed=seed),
               check_homogeneity(scheme, grid, seed=seed)]
    if scheme.continuous is not None:
        h_list = (grid.h, grid.h / 2, grid.h / 4)
        reports.append(_safe("consistency", lambda: check_consistency(
            scheme, h_list=h_list, domain=consistency_domain or grid.domain)))
    reports.append(_safe("maximum_principle",
                         lambda: check_maximum_principle(scheme, grid, instances, seed)))
    reports.append(_safe("comparison", lambda: check_comparison(scheme, grid, instances, seed)))
    try:
        lam = solve_eigen(scheme, grid).eigenvalue
    except EigensolveError as exc:
        reports.append(CheckReport("eigenvalue", False, details={"error": str(exc)}))
        return reports
    reports.append(_safe("certificate_soundness",
                         lambda: check_certificate(scheme, grid, lam, instances, seed)))
    if scheme.homogeneity_degree == 1:
        # F + tau u = f >= 0 has a (nonpositive) solution only below the
        # eigenvalue of the reflected scheme too, which is the smaller one
        # for concave schemes
        try:
            lam_neg = solve_eigen(reflect_scheme(scheme), grid).eigenvalue
        except EigensolveError:
            lam_neg = lam
        reports.append(_safe("threshold_maximum_principle",
                             lambda: check_threshold_maximum_principle(
                                 scheme, grid, min(lam, lam_neg), instances=instances,
                                 seed=seed)))
    reports.append(_safe("monotone_iteration",
                         lambda: check_monotone_iteration(scheme, grid, lam)))
    return reports
