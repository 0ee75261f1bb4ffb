"""Discrete Dirichlet problems, monotone iteration and eigenvalue bracketing.

``solve_dirichlet`` handles ``F_h[u] = f`` in the interior with ``u = g``
on the boundary.  Newton's method on the assembled Jacobian is exact in
one step for linear schemes and coincides with Howard's policy iteration
for piecewise linear ones (sup/inf families, Pucci, Fucik); smooth
nonlinear schemes get a damped, regularized Newton; a pseudo-time fixed
point is the last resort.

``monotone_iteration`` repeatedly solves ``F_h[u_{n+1}] = f - lam u_n^d``
from ``u_1 = 0``.  For ``f <= 0`` the iterates are nondecreasing and they
converge exactly when ``lam`` is below the principal eigenvalue, which
``bracket_eigenvalue`` turns into a bisection.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as sla

from .errors import (BadBracket, MonotonicityViolation, NoConvergence, NonFinite,
                     NotMonotone)
from .grid import Grid, MeshFunction
from .schemes import SchemeSpec, apply, jacobian, stencil_weights


def _as_array(value, size, name):
    if isinstance(value, MeshFunction):
        value = value.values
    out = np.broadcast_to(np.asarray(value, float), (size,)).copy() \
        if np.ndim(value) == 0 else np.asarray(value, float)
    if out.shape != (size,):
        raise ValueError(f"{name} has shape {out.shape}, expected ({size},)")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} is not finite")
    return out


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """``F_h[u] = f`` on interior nodes, ``u = g`` on boundary nodes.

    ``f`` and ``g`` accept scalars, arrays of the interior/boundary size, or
    a full :class:`MeshFunction` (whose interior/boundary part is taken).
    """

    scheme: SchemeSpec
    grid: Grid
    f: object = 0.0
    g: object = 0.0

    def __post_init__(self):
        f, g = self.f, self.g
        if isinstance(f, MeshFunction):
            f = f.interior
        if isinstance(g, MeshFunction):
            g = g.boundary
        object.__setattr__(self, "f", _as_array(f, self.grid.n_interior, "f"))
        object.__setattr__(self, "g", _as_array(g, self.grid.n_boundary, "g"))

    def initial_values(self, interior=None) -> np.ndarray:
        values = np.empty(self.grid.n_nodes)
        values[: self.grid.n_interior] = 0.0 if interior is None else interior
        values[self.grid.n_interior:] = self.g
        return values

    def residual(self, values) -> np.ndarray:
        return apply(self.scheme, self.grid, values) - self.f


def _factor(A):
    try:
        lu = sla.splu(A.tocsc())
    except RuntimeError:
        return None
    return lu


def _newton(problem: DirichletProblem, values, tol, max_iter):
    """Newton / policy iteration; returns ``(values, residual, ok)``."""
    scheme, N = problem.scheme, problem.grid.n_interior
    full_steps = scheme.is_piecewise_linear
    mu = 0.0
    grid = problem.grid
    # natural size of the diagonal, used to scale the Levenberg term
    natural = 2 * float(np.sum(grid.stencil.norms**-2.0)) / grid.h**2
    F, J = jacobian(scheme, grid, values)
    r = F - problem.f
    res = np.abs(r).max()
    for _ in range(max_iter):
        if res <= tol:
            return values, res, True
        A = J[:, :N]
        scale = max(float(np.abs(A.diagonal()).max()), natural)
        lu = _factor(A - mu * scale * sparse.identity(N)) if mu else _factor(A)
        delta = -lu.solve(r) if lu is not None else None
        if delta is None or not np.all(np.isfinite(delta)):
            mu = max(10 * mu, 1e-6)
            continue
        step, accepted = 1.0, False
        for _ in range(30):
            trial = values.copy()
            trial[:N] += step * delta
            try:
                F_t, J_t = jacobian(scheme, problem.grid, trial)
            except NonFinite:
                step /= 2
                continue
            r_t = F_t - problem.f
            res_t = np.abs(r_t).max()
            if full_steps or r_t @ r_t < r @ r:
                accepted = True
                break
            step /= 2
        if not accepted:
            if mu > 1e6:
                return values, res, False
            mu = max(10 * mu, 1e-6)
            continue
        values, F, J, r, res = trial, F_t, J_t, r_t, res_t
        mu = mu / 10 if mu > 1e-6 else 0.0
    return values, res, res <= tol


def _diffusion_bound(problem: DirichletProblem, values) -> float:
    sc = problem.scheme.structure_constants
    if sc is not None:
        return float(sc[1])
    rng = np.random.default_rng(0)
    grid = problem.grid
    bound = 0.0
    for trial in (values, values + rng.normal(scale=max(1.0, np.abs(values).max()),
                                              size=values.shape)):
        _, _, plus, minus = stencil_weights(problem.scheme, grid, trial)
        bound = max(bound, float(((plus + minus) / 2 * grid.step_lengths**2).max()))
    return max(bound, 1e-12)


def _pseudo_time(problem: DirichletProblem, values, tol, max_steps):
    """Explicit fixed point ``u <- u + tau (F_h[u] - f)``."""
    grid, N = problem.grid, problem.grid.n_interior
    a0 = _diffusion_bound(problem, values)
    tau = grid.h**2 / (4 * a0 * float(np.sum(grid.stencil.norms**-2.0)))
    res_old, increases, warned = np.inf, 0, False
    for _ in range(max_steps):
        r = problem.residual(values)
        res = np.abs(r).max()
        if res <= tol:
            return values, res, True
        if res > res_old:
            tau /= 2
            increases += 1
            if increases >= 10 and not warned:
                warnings.warn("pseudo-time residual increased for 10 consecutive steps",
                              NotMonotone, stacklevel=3)
                warned = True
        else:
            increases = 0
        res_old = res
        values = values.copy()
        values[:N] += tau * r
    return values, res_old, False


def solve_dirichlet(problem: DirichletProblem, tol: float = 1e-9, max_iter: int = 200,
                    initial=None, max_pseudo_time_steps: int = 200_000) -> MeshFunction:
    """Solve ``F_h[u] = f``, ``u = g`` to a max-norm residual of ``tol``.

    Parameters
    ----------
    problem : DirichletProblem
    tol : float
        Absolute bound on ``max |F_h[u] - f|`` over interior nodes.
    max_iter : int
        Newton (policy) iterations before falling back to pseudo-time.
    initial : array_like, optional
        Interior starting values.

    Raises
    ------
    NoConvergence
        When neither method reaches ``tol``.
    """
    values = problem.initial_values(initial)
    values, res, ok = _newton(problem, values, tol, max_iter)
    if not ok:
        values, res, ok = _pseudo_time(problem, values, tol, max_pseudo_time_steps)
    if not ok:
        raise NoConvergence(f"Dirichlet solve stopped at residual {res:.3e} > {tol:.1e}",
                            result=MeshFunction(problem.grid, values))
    return MeshFunction(problem.grid, values)


# ---------------------------------------------------------------------------
# monotone iteration


@dataclass(frozen=True)
class Converged:
    """Monotone iteration reached a fixed point.

    With ``extrapolated`` the run stopped early once the increments settled
    into a geometric decay, and ``u`` is the geometric-tail extrapolation of
    the last iterate.
    """

    u: MeshFunction
    steps: int
    extrapolated: bool = False
    converged = True


@dataclass(frozen=True)
class Diverged:
    """Monotone iteration blew up; ``reason`` is ``"blowup"`` or ``"growth"``."""

    steps: int
    norm: float
    ratio: float | None
    reason: str
    converged = False


def shifted_scheme(scheme: SchemeSpec, lam: float) -> SchemeSpec:
    """The scheme ``F + lam z^d``; of positive type whenever ``F`` is and ``lam <= 0``."""
    d = scheme.homogeneity_degree
    base_eval, base_partials = scheme.evaluator, scheme.derivatives

    def evaluator(x, z, q, s, h):
        return base_eval(x, z, q, s, h) + lam * np.sign(z) * np.abs(z) ** d

    def partials(x, z, q, s, h):
        dz, dq, ds = base_partials(x, z, q, s, h)
        return dz + lam * d * np.abs(z) ** (d - 1), dq, ds

    return replace(scheme, name=f"{scheme.name}+({lam})u", evaluator=evaluator,
                   partials=partials, is_linear=scheme.is_linear and d == 1)


class _Stepper:
    """Solves ``F_h[u] = rhs`` with zero boundary data, reusing work."""

    def __init__(self, scheme: SchemeSpec, grid: Grid):
        self.scheme, self.grid = scheme, grid
        self.lu = None
        if scheme.is_linear:
            _, J = jacobian(scheme, grid, np.zeros(grid.n_nodes))
            self.lu = _factor(J[:, : grid.n_interior])

    def __call__(self, rhs, warm):
        if self.lu is not None:
            return self.lu.solve(rhs)
        problem = DirichletProblem(self.scheme, self.grid, rhs, 0.0)
        tol = 1e-10 * max(1.0, float(np.abs(rhs).max()))
        return solve_dirichlet(problem, tol=tol, initial=warm).interior.copy()


def _settled(ratios, rtol=1e-3, contraction=0.9) -> bool:
    """Ratios agree to ``rtol |1 - r|`` and their changes shrink geometrically.

    The second condition rejects slow algebraic drifts toward one, which
    would otherwise pass the first test with a misleading ratio.
    """
    if len(ratios) < 4:
        return False
    gap = abs(1.0 - ratios[-1])
    d1, d2, d3 = (abs(ratios[-k] - ratios[-k - 1]) for k in (1, 2, 3))
    return gap > 0 and max(d1, d2) <= rtol * gap and d1 <= contraction * d2 \
        and d2 <= contraction * d3


class _Undecided(NoConvergence):
    pass


def _monotone(stepper, grid, lam, f, tol, max_iter, blowup_threshold, early_exit):
    d = stepper.scheme.homogeneity_degree
    u = np.zeros(grid.n_interior)
    prev, ratios = None, []
    for n in range(1, max_iter + 1):
        new = stepper(f - lam * u**d, u)
        diff = new - u
        if diff.min() < -1e-10 * max(1.0, float(np.abs(u).max())):
            raise MonotonicityViolation(
                f"iterate {n} decreased by {-diff.min():.3e}; the scheme is not of positive type")
        dn = float(np.abs(diff).max())
        # increments of u^d follow a degree-one power iteration asymptotically
        dn_d = dn if d == 1 else float(np.abs(np.maximum(new, u)**d - u**d).max())
        u = np.maximum(new, u)
        norm = float(np.abs(u).max())
        if not np.isfinite(norm) or norm > blowup_threshold:
            return Diverged(n, norm, ratios[-1] if ratios else None, "blowup")
        if dn <= tol:
            return Converged(MeshFunction.from_interior(grid, u), n)
        if prev:
            ratios.append(dn_d / prev)
            if _settled(ratios):
                r = ratios[-1]
                if r > 1:
                    return Diverged(n, norm, r, "growth")
                if early_exit:
                    tail = diff * r ** (1 / d) / (1 - r ** (1 / d))
                    return Converged(MeshFunction.from_interior(grid, u + tail), n,
                                     extrapolated=True)
        prev = dn_d
    raise _Undecided(f"monotone iteration undecided after {max_iter} steps "
                        f"(last increment ratio {ratios[-1] if ratios else float('nan'):.9f})")


def monotone_iteration(scheme: SchemeSpec, grid: Grid, lam: float, f=-1.0, tol: float = 1e-10,
                       max_iter: int = 10_000, blowup_threshold: float = 1e8,
                       early_exit: bool = False):
    """Iterate ``F_h[u_{n+1}] = f - lam u_n^d`` from ``u_1 = 0``.

    Divergence is declared when ``|u_n|_inf`` exceeds ``blowup_threshold``
    or when the increment ratio ``|u_{n+1}^d - u_n^d| / |u_n^d - u_{n-1}^d|``
    has settled (successive ratios agree to ``1e-3 |1 - ratio|`` and their
    changes decay geometrically) at a value above one.  Asymptotically the
    ratio is ``lam / lambda_{1,h}``, so this separates the two regimes even
    very close to the eigenvalue.

    Parameters
    ----------
    f : float or array_like
        Right-hand side, ``<= 0`` on interior nodes.
    early_exit : bool
        Also stop once a settled ratio below one is seen, returning the
        extrapolated limit.

    Returns
    -------
    Converged or Diverged

    Raises
    ------
    MonotonicityViolation
        If an iterate decreases by more than ``1e-10 max(1, |u_n|_inf)``.
    NoConvergence
        If neither outcome is reached in ``max_iter`` steps.
    """
    f = _as_array(f, grid.n_interior, "f")
    if np.any(f > 0):
        raise ValueError("monotone iteration needs f <= 0")
    if lam < 0:
        # F + lam u^d is itself of positive type: one Dirichlet solve
        u = solve_dirichlet(DirichletProblem(shifted_scheme(scheme, lam), grid, f, 0.0),
                            tol=1e-10 * max(1.0, float(np.abs(f).max())))
        return Converged(u, 1)
    return _monotone(_Stepper(scheme, grid), grid, lam, f, tol, max_iter, blowup_threshold,
                     early_exit)


class Interval(NamedTuple):
    lower: float
    upper: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower


def bracket_eigenvalue(scheme: SchemeSpec, grid: Grid, lambda_lo: float, lambda_hi: float,
                       tol: float = 1e-6, max_iter: int = 10_000) -> Interval:
    """Bisect on convergence of the monotone iteration with ``f = -1``.

    Returns an interval of width at most ``tol`` whose lower end converges
    and whose upper end diverges, hence containing ``lambda_{1,h}``.

    Raises
    ------
    BadBracket
        If ``lambda_lo`` diverges or ``lambda_hi`` converges.
    """
    if not lambda_lo < lambda_hi:
        raise BadBracket(f"empty bracket [{lambda_lo}, {lambda_hi}]")
    stepper = _Stepper(scheme, grid)
    f = -np.ones(grid.n_interior)

    def converges(lam):
        if lam < 0:
            return True
        try:
            return _monotone(stepper, grid, lam, f, 1e-12, max_iter, 1e8, True).converged
        except _Undecided:
            # undecided only at the eigenvalue itself, where the iterates grow linearly
            return False

    lo, hi = float(lambda_lo), float(lambda_hi)
    if not converges(lo):
        raise BadBracket(f"monotone iteration diverges at the lower end {lo}")
    if converges(hi):
        raise BadBracket(f"monotone iteration converges at the upper end {hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if converges(mid):
            lo = mid
        else:
            hi = mid
    return Interval(lo, hi)
