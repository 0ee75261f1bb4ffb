"""Principal eigenpair from the discrete inf-sup formula.

``lambda_h = -min_{U > 0} max_i F_h[U](x_i) / U_i^d`` with ``U = 0`` on the
boundary.  The outer ``max`` is replaced by the smooth maximum
``tau * log(sum exp(G_i / tau))`` and ``tau`` is annealed towards zero; each
smoothed problem is minimized with L-BFGS.  Schemes that are convex in
``(q, s)`` are optimized in the variable ``v = log U``, where the problem is
convex.  After every temperature the iterate is refined by semismooth Newton
on the equalization conditions ``G_i(U) = -lambda`` (the optimality
conditions of the min-max), and ``-max_i G_i`` at the final iterate is
reported.  That value is itself a certified lower bound for ``lambda_h``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse as sparse
import scipy.sparse.linalg as sla
from scipy.special import logsumexp, softmax

from .errors import NoConvergence, NonFinite, NonPositiveIterate
from .grid import Grid, MeshFunction
from .schemes import SchemeSpec, _values, apply, check_positive_type, jacobian, stencil_weights

logger = logging.getLogger(__name__)

PARAMETERIZATIONS = ("auto", "log", "direct")
INITIAL_GUESSES = ("parabola", "custom")


@dataclass
class MinimaxConfig:
    """Optimizer settings.

    ``temperatures`` are multiples of the spread ``max G - min G`` of the
    initial guess.  ``outer_tolerance=None`` picks 1e-8 for linear and
    log-convex schemes and 1e-6 otherwise.
    """

    parameterization: str = "auto"
    temperatures: tuple = (1.0, 1e-1, 1e-2, 1e-4, 1e-6)
    inner_tolerance: float = 1e-10
    outer_tolerance: float | None = None
    max_iterations: int = 300
    seed: int = 0
    initial_guess: str = "parabola"
    initial_values: np.ndarray | None = None

    def __post_init__(self):
        if self.parameterization not in PARAMETERIZATIONS:
            raise ValueError(f"parameterization must be one of {PARAMETERIZATIONS}")
        if self.initial_guess not in INITIAL_GUESSES:
            raise ValueError(f"initial_guess must be one of {INITIAL_GUESSES}")
        temps = tuple(float(t) for t in self.temperatures)
        if not temps or any(t <= 0 for t in temps):
            raise ValueError("temperatures must be positive")
        if any(b >= a for a, b in zip(temps, temps[1:])):
            raise ValueError("temperatures must be strictly decreasing")
        if temps[-1] > 1e-6 * temps[0]:
            raise ValueError("final temperature must be <= 1e-6 * initial")
        self.temperatures = temps
        if self.inner_tolerance <= 0:
            raise ValueError("inner_tolerance must be positive")
        if self.outer_tolerance is not None and self.outer_tolerance <= 0:
            raise ValueError("outer_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.initial_guess == "custom" and self.initial_values is None:
            raise ValueError("initial_guess='custom' needs initial_values")


@dataclass(frozen=True)
class EigenResult:
    """Discrete principal eigenpair.

    ``eigenvalue`` is ``lambda_{1,h}``; ``eigenfunction`` is positive
    inside, zero on the boundary and has max-norm one.
    """

    eigenvalue: float
    eigenfunction: MeshFunction
    residual: float
    certificate: float
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def lambda_(self) -> float:
        return self.eigenvalue


def _power(U, d):
    return U if d == 1 else np.abs(U) ** d * np.sign(U)


def ratios(scheme: SchemeSpec, grid: Grid, values) -> np.ndarray:
    """``F_h[U](x_i) / U_i^d`` at every interior node."""
    values = _values(values)
    U = values[: grid.n_interior]
    if np.any(U <= 0):
        raise NonPositiveIterate("candidate must be strictly positive on the interior")
    return apply(scheme, grid, values) / _power(U, scheme.homogeneity_degree)


def _with_zero_boundary(grid, U):
    U = np.asarray(U, float)
    if U.shape != (grid.n_interior,):
        raise ValueError(f"expected {grid.n_interior} interior values, got {U.shape}")
    full = np.zeros(grid.n_nodes)
    full[: grid.n_interior] = U
    return full


def objective(scheme: SchemeSpec, grid: Grid, U) -> float:
    """``max_i F_h[U](x_i) / U_i^d`` for interior values ``U`` (boundary zero)."""
    return float(ratios(scheme, grid, _with_zero_boundary(grid, U)).max())


def lower_bound_certificate(scheme: SchemeSpec, grid: Grid, phi) -> float:
    """``-max_x F_h[phi] / phi^d``; a lower bound for ``lambda_h`` for any
    ``phi > 0`` inside.  Boundary values of ``phi`` are used as given."""
    return -float(ratios(scheme, grid, phi).max())


def residual(scheme: SchemeSpec, grid: Grid, lam: float, w) -> float:
    """``max_i |F_h[w](x_i) + lam w_i^d|``."""
    values = _values(w)
    U = values[: grid.n_interior]
    return float(np.max(np.abs(apply(scheme, grid, values)
                                + lam * _power(U, scheme.homogeneity_degree))))


def parabola_guess(grid: Grid) -> np.ndarray:
    """Product of axis parabolas ``(x_k - a_k)(b_k - x_k)``, max one."""
    x = grid.interior_points
    lo = np.asarray(grid.domain.lower)
    hi = np.asarray(grid.domain.upper)
    U = np.prod((x - lo) * (hi - x), axis=1)
    return U / U.max()


class _Solver:
    def __init__(self, scheme, grid, config):
        self.scheme = scheme
        self.grid = grid
        self.config = config
        self.N = grid.n_interior
        self.d = scheme.homogeneity_degree
        self.full = np.zeros(grid.n_nodes)
        param = config.parameterization
        if param == "auto":
            param = "log" if scheme.is_log_convexifiable else "direct"
        self.param = param
        tol = config.outer_tolerance
        if tol is None:
            tol = 1e-8 if (scheme.is_linear or scheme.is_log_convexifiable) else 1e-6
        self.tol = tol

    # -- basic quantities -------------------------------------------------
    def _set(self, U):
        self.full[: self.N] = U
        return self.full

    def G(self, U):
        return apply(self.scheme, self.grid, self._set(U)) / _power(U, self.d)

    def smooth_max_grad(self, U, tau):
        """Smoothed objective and its gradient with respect to ``U``."""
        F, centre, plus, minus = stencil_weights(self.scheme, self.grid, self._set(U))
        Ud = _power(U, self.d)
        G = F / Ud
        val = tau * logsumexp(G / tau)
        w = softmax(G / tau)
        a = w / Ud
        n = self.grid.n_nodes
        g = np.bincount(self.grid.plus.ravel(), (plus * a[:, None]).ravel(), minlength=n)
        g += np.bincount(self.grid.minus.ravel(), (minus * a[:, None]).ravel(), minlength=n)
        g = g[: self.N] + centre * a - self.d * w * F / (Ud * U)
        return val, g, G

    # -- phase 1: annealed smooth max -------------------------------------
    def anneal_stage(self, U, tau):
        k = int(np.argmax(U))
        U = U / U[k]
        free = np.ones(self.N, dtype=bool)
        free[k] = False
        log = self.param == "log"

        def unpack(xv):
            V = np.empty(self.N)
            V[free] = xv
            if log:
                V[k] = 0.0
                return np.exp(V)
            V[k] = 1.0
            return V

        def fun(xv):
            U_ = unpack(xv)
            if np.any(U_ <= 0):
                return np.inf, np.zeros_like(xv)
            val, g, _ = self.smooth_max_grad(U_, tau)
            if log:
                g = g * U_
            return val, g[free]

        x0 = np.log(U[free]) if log else U[free]
        bounds = None if log else [(1e-12, None)] * int(free.sum())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = scipy.optimize.minimize(
                fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                options={"maxiter": self.config.max_iterations, "ftol": 1e-16,
                         "gtol": self.config.inner_tolerance, "maxcor": 20})
        U_new = unpack(res.x)
        return U_new / U_new.max(), int(res.nit)

    # -- phase 2: Newton on F_h[U] + lam U^d = 0 ----------------------------
    def polish(self, U, max_steps=100, step_cap=0.5, patience=8):
        """Newton in ``v = log U`` with the largest node pinned.

        Steps are capped at ``|dv| <= step_cap``; no monotone line search,
        which stalls on the steep ratios of high-degree schemes.  The iterate
        with the smallest residual is returned together with its ``lam``.
        """
        d = self.d
        N = self.N
        rows = np.arange(N)
        v = np.log(U / U.max())
        U = np.exp(v)
        Ud = _power(U, d)
        F = apply(self.scheme, self.grid, self._set(U))
        # least-squares fit of F + lam U^d = 0 is a better start than -max G
        lam = -float(F @ Ud / (Ud @ Ud))
        best = (np.inf, U, lam)
        stale = 0
        steps = 0
        for steps in range(1, max_steps + 1):
            U = np.exp(v)
            try:
                with np.errstate(all="ignore"):
                    F, J = jacobian(self.scheme, self.grid, self._set(U))
            except NonFinite:
                break
            r = F + lam * _power(U, d)
            rmax = float(np.abs(r).max())
            if rmax < best[0]:
                best = (rmax, U.copy(), lam)
                stale = 0
            else:
                stale += 1
            Jint = J[:, :N]
            if rmax <= 1e-15 * abs(Jint).max() or stale >= patience:
                break
            k = int(np.argmax(v))
            mask = np.ones(N)
            mask[k] = 0.0
            M = ((Jint + sparse.diags(lam * d * U ** (d - 1))) @ sparse.diags(U * mask)).tocsc()
            M = M + sparse.csc_matrix((_power(U, d), (rows, np.full(N, k))), shape=(N, N))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                try:
                    delta = sla.spsolve(M, -r)
                except RuntimeError:
                    break
            if not np.all(np.isfinite(delta)):
                break
            dv = delta * mask
            alpha = min(1.0, step_cap / max(float(np.abs(dv).max()), 1e-300))
            v = v + alpha * dv
            v -= v.max()
            lam += alpha * delta[k]
        _, U, lam = best
        return U / U.max(), lam, steps

    def finish(self, U, lam=None):
        """Pick ``lam`` (Newton's value or ``-max G``) with the smaller residual."""
        G = self.G(U)
        candidates = [-float(G.max())] + ([lam] if lam is not None else [])
        scored = [(residual(self.scheme, self.grid, c, self._set(U)), c) for c in candidates]
        res, lam = min(scored)
        return float(lam), res, G


def solve_eigen(scheme: SchemeSpec, grid: Grid, config: MinimaxConfig | None = None,
                *, check: bool = True) -> EigenResult:
    """Compute ``(lambda_{1,h}, w_{1,h})`` by minimizing ``max_i G_i(U)``.

    Raises
    ------
    NoConvergence
        When the final residual exceeds ten times the outer tolerance.
        The partial :class:`EigenResult` is attached as ``.result``.
    """
    config = config or MinimaxConfig()
    solver = _Solver(scheme, grid, config)
    notes = []
    if check:
        report = check_positive_type(scheme, grid, sample_count=50, seed=config.seed)
        if not report.passed:
            notes.append(f"scheme is not of positive type on this grid "
                         f"(worst margin {report.worst_margin:.3g})")
            logger.warning(notes[-1])

    if config.initial_guess == "custom":
        U = np.asarray(config.initial_values, float).copy()
        if U.shape != (grid.n_interior,):
            raise ValueError("initial_values must hold one value per interior node")
        if np.any(U <= 0):
            raise NonPositiveIterate("initial_values must be strictly positive")
        U = U / U.max()
    else:
        U = parabola_guess(grid)

    G0 = solver.G(U)
    spread = float(G0.max() - G0.min())
    stages = []
    lam_prev = None
    lam, res, _ = solver.finish(U)
    U_best = U

    schedule = [None] if spread <= solver.tol else [t * spread for t in config.temperatures]
    for tau in schedule:
        nit = 0
        if tau is not None and grid.n_interior > 1:
            U, nit = solver.anneal_stage(U, tau)
        U_pol, lam_newton, newton_steps = solver.polish(U)
        lam_pol, res_pol, _ = solver.finish(U_pol, lam_newton)
        stages.append({"temperature": tau, "lbfgs_iterations": nit,
                       "newton_steps": newton_steps, "lambda": lam_pol, "residual": res_pol})
        logger.debug("stage tau=%s lambda=%.15g residual=%.3g", tau, lam_pol, res_pol)
        if res_pol <= res:
            U_best, lam, res = U_pol, lam_pol, res_pol
        U = U_best
        if res <= solver.tol and (tau is None or (
                lam_prev is not None and abs(lam - lam_prev) <= solver.tol * (1 + abs(lam)))):
            break
        lam_prev = lam

    w = MeshFunction.from_interior(grid, U_best / U_best.max())
    G = solver.G(w.interior)
    certificate = lower_bound_certificate(scheme, grid, w)
    active = np.flatnonzero(G >= G.max() - 1e-10 * max(1.0, abs(G.max())))
    converged = res <= 10 * solver.tol
    result = EigenResult(
        eigenvalue=lam, eigenfunction=w, residual=res, certificate=certificate,
        converged=converged,
        diagnostics={"parameterization": solver.param, "outer_tolerance": solver.tol,
                     "initial_spread": spread, "final_spread": float(G.max() - G.min()),
                     "stages": stages, "active_nodes": active.tolist(), "warnings": notes})
    if not converged:
        raise NoConvergence(
            f"residual {res:.3g} above 10 x outer tolerance {solver.tol:.1g}", result=result)
    return result
