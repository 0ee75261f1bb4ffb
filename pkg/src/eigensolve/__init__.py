"""Principal eigenvalues of positive-type finite difference schemes.

The discrete principal eigenvalue of a scheme ``F_h`` on a box is

    lambda_{1,h} = -min_{U > 0} max_i F_h[U](x_i) / U_i^d

with ``U = 0`` on the boundary.  :func:`solve_eigen` evaluates it for any
positive-type, positively homogeneous scheme; :mod:`eigensolve.linear_oracle`
and :func:`bracket_eigenvalue` provide independent cross-checks.
"""

from .dirichlet import (DirichletProblem, bracket_eigenvalue, monotone_iteration,
                        solve_dirichlet)
from .errors import EigensolveError, NoConvergence
from .grid import BoxDomain, Grid, MeshFunction, Stencil, build_grid, neighbors
from .harness import (ConvergenceReport, emit_csv, emit_eigenfunction, error_norms,
                      run_convergence)
from .linear_oracle import assemble_matrix, dense_spectrum, inverse_power
from .minimax import EigenResult, MinimaxConfig, lower_bound_certificate, solve_eigen
from .problems import EXAMPLES, ExactSolution, build_operator
from .schemes import (SchemeSpec, check_consistency, check_homogeneity, check_positive_type,
                      fucik, hjb, laplacian, ornstein_uhlenbeck, p_laplace_1d, pucci,
                      reflect_scheme, variable_coefficient)

__version__ = "0.1.0"

__all__ = [
    "BoxDomain", "ConvergenceReport", "DirichletProblem", "EXAMPLES", "EigenResult",
    "EigensolveError", "ExactSolution", "Grid", "MeshFunction", "MinimaxConfig",
    "NoConvergence", "SchemeSpec", "Stencil", "assemble_matrix", "bracket_eigenvalue",
    "build_grid", "build_operator", "check_consistency", "check_homogeneity",
    "check_positive_type", "dense_spectrum", "emit_csv", "emit_eigenfunction", "error_norms",
    "fucik", "hjb", "inverse_power", "laplacian", "lower_bound_certificate",
    "monotone_iteration", "neighbors", "ornstein_uhlenbeck", "p_laplace_1d", "pucci",
    "reflect_scheme", "run_convergence", "solve_dirichlet", "solve_eigen",
    "variable_coefficient",
]
