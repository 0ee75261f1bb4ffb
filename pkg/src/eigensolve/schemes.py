"""Finite difference schemes ``F_h[u](x) = F(x, u(x), dq u(x), d2 u(x))``.

A scheme is a vectorized *evaluator* ``F(x, z, q, s, h)`` acting on

* ``x`` -- node coordinates, shape ``(m, n)``
* ``z`` -- the value ``u(x)``, shape ``(m,)``
* ``q`` -- central first quotients, shape ``(m, K)``
* ``s`` -- second quotients, shape ``(m, K)``

with one column per stencil direction.  One-sided quotients are recovered
from ``q +- (h|y|/2) s``, which is how the p-Laplacian flux form is written.
Evaluators never see neighbour values directly; :func:`apply` and
:func:`jacobian` do the gathering.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sparse

from .errors import EmptyFamily, NonFinite
from .grid import BoxDomain, Grid, MeshFunction, Stencil, build_grid

Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float], np.ndarray]
Partials = Callable[..., tuple]


@dataclass(frozen=True, eq=False)
class SchemeSpec:
    """A discrete operator together with its structural metadata.

    ``partials`` (optional) returns ``(dF/dz, dF/dq, dF/ds)`` with the shapes
    of ``z, q, s``; for piecewise linear schemes it returns the coefficients
    of the active branch.  Without it derivatives fall back to central
    finite differences of the evaluator.

    ``continuous`` (optional) is the limiting operator ``F(x, z, p, M)``
    with gradient ``p`` of shape ``(m, n)`` and Hessian ``M`` of shape
    ``(m, n, n)``; it is used by :func:`check_consistency`.
    """

    name: str
    evaluator: Evaluator
    stencil: Stencil
    homogeneity_degree: float = 1.0
    is_linear: bool = False
    is_convex_in_qs: bool = False
    is_concave_in_qs: bool = False
    is_smooth: bool = True
    structure_constants: tuple | None = None
    partials: Partials | None = None
    continuous: Callable | None = None
    params: dict = field(default_factory=dict)

    @property
    def is_log_convexifiable(self) -> bool:
        # exp-substitution keeps convexity for degree-one schemes convex in
        # (q, s) and nondecreasing in neighbour values
        return self.homogeneity_degree == 1 and self.is_convex_in_qs

    @property
    def is_piecewise_linear(self) -> bool:
        return self.partials is not None and self.homogeneity_degree == 1 and (
            self.is_linear or not self.is_smooth)

    def __call__(self, x, z, q, s, h):
        return self.evaluator(x, z, q, s, h)

    def derivatives(self, x, z, q, s, h):
        if self.partials is not None:
            return self.partials(x, z, q, s, h)
        return finite_difference_partials(self.evaluator, x, z, q, s, h)


def finite_difference_partials(evaluator, x, z, q, s, h, rel_step=1e-6):
    """Central-difference estimate of ``(dF/dz, dF/dq, dF/ds)``."""
    z = np.asarray(z, float)
    q = np.asarray(q, float)
    s = np.asarray(s, float)

    def diff(base, bump_of):
        step = rel_step * (1.0 + np.abs(base))
        return (evaluator(x, *bump_of(step)) - evaluator(x, *bump_of(-step))) / (2 * step)

    dz = diff(z, lambda e: (z + e, q, s, h))
    dq = np.empty_like(q)
    ds = np.empty_like(s)
    for k in range(q.shape[1]):
        def bump_q(e, k=k):
            qq = q.copy()
            qq[:, k] += e
            return z, qq, s, h

        def bump_s(e, k=k):
            ss = s.copy()
            ss[:, k] += e
            return z, q, ss, h

        dq[:, k] = diff(q[:, k], bump_q)
        ds[:, k] = diff(s[:, k], bump_s)
    return dz, dq, ds


# ---------------------------------------------------------------------------
# quotients and application to mesh functions


@dataclass(frozen=True)
class QuotientBundle:
    """Difference quotients at one node, one entry per stencil direction."""

    q: np.ndarray
    s: np.ndarray
    forward: np.ndarray
    backward: np.ndarray


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, MeshFunction) else np.asarray(u, float)


def all_quotients(grid: Grid, values: np.ndarray):
    """Quotients at every interior node; arrays of shape ``(N, K)``."""
    dist = grid.step_lengths
    centre = values[: grid.n_interior, None]
    up = values[grid.plus]
    down = values[grid.minus]
    forward = (up - centre) / dist
    backward = (centre - down) / dist
    q = (forward + backward) / 2
    s = (up + down - 2 * centre) / dist**2
    return q, s, forward, backward


def quotients(grid: Grid, u, node: int) -> QuotientBundle:
    """Central, second and one-sided quotients of ``u`` at an interior slot."""
    values = _values(u)
    dist = grid.step_lengths
    centre = values[node]
    up = values[grid.plus[node]]
    down = values[grid.minus[node]]
    forward = (up - centre) / dist
    backward = (centre - down) / dist
    return QuotientBundle(q=(forward + backward) / 2,
                          s=(up + down - 2 * centre) / dist**2,
                          forward=forward, backward=backward)


def _check_finite(values, scheme):
    if not np.all(np.isfinite(values)):
        raise NonFinite(f"scheme {scheme.name!r} produced non-finite values")
    return values


def apply(scheme: SchemeSpec, grid: Grid, u) -> np.ndarray:
    """``F_h[u]`` at every interior node."""
    values = _values(u)
    q, s, _, _ = all_quotients(grid, values)
    out = scheme.evaluator(grid.interior_points, values[: grid.n_interior], q, s, grid.h)
    return _check_finite(np.asarray(out, float), scheme)


def evaluate(scheme: SchemeSpec, grid: Grid, u, node: int) -> float:
    """``F_h[u]`` at a single interior slot."""
    values = _values(u)
    b = quotients(grid, values, node)
    out = scheme.evaluator(grid.interior_points[node: node + 1],
                           values[node: node + 1], b.q[None, :], b.s[None, :], grid.h)
    return float(_check_finite(np.asarray(out, float), scheme)[0])


def stencil_weights(scheme: SchemeSpec, grid: Grid, values: np.ndarray):
    """Derivatives of ``F_h[u]`` with respect to centre and neighbour values.

    Returns ``(F, centre, plus, minus)`` where ``plus[i, k]`` is the
    derivative with respect to ``u(x_i + h y_k)``.
    """
    q, s, _, _ = all_quotients(grid, values)
    x = grid.interior_points
    z = values[: grid.n_interior]
    F = _check_finite(np.asarray(scheme.evaluator(x, z, q, s, grid.h), float), scheme)
    dz, dq, ds = scheme.derivatives(x, z, q, s, grid.h)
    dist = grid.step_lengths
    dq = np.broadcast_to(dq, q.shape)
    ds = np.broadcast_to(ds, s.shape)
    plus = dq / (2 * dist) + ds / dist**2
    minus = -dq / (2 * dist) + ds / dist**2
    centre = np.broadcast_to(dz, z.shape) - 2 * (ds / dist**2).sum(axis=1)
    return F, centre, plus, minus


def jacobian(scheme: SchemeSpec, grid: Grid, u):
    """Value and Jacobian of ``F_h`` at ``u``.

    The Jacobian has one row per interior node and one column per stored
    node (interior columns first).  For piecewise linear degree-one schemes
    ``J(u) @ u == F_h[u]`` exactly, which is what policy iteration uses.
    """
    values = _values(u)
    F, centre, plus, minus = stencil_weights(scheme, grid, values)
    N = grid.n_interior
    rows = np.arange(N)
    K = grid.plus.shape[1]
    r = np.concatenate([rows, np.repeat(rows, K), np.repeat(rows, K)])
    c = np.concatenate([rows, grid.plus.ravel(), grid.minus.ravel()])
    v = np.concatenate([centre, plus.ravel(), minus.ravel()])
    J = sparse.csr_matrix((v, (r, c)), shape=(N, grid.n_nodes))
    return F, J


# ---------------------------------------------------------------------------
# built-in operators


def _coef(value, x, width):
    """Evaluate a coefficient (constant or callable of x) as shape (m, width)."""
    if callable(value):
        out = np.asarray(value(x), float)
        if out.ndim == 1 and width is not None:
            out = out[:, None]
    else:
        out = np.asarray(value, float)
    shape = (x.shape[0], width) if width is not None else (x.shape[0],)
    return np.broadcast_to(out, shape)


@dataclass(frozen=True)
class Coefficients:
    """One linear operator ``sum a_y s_y + sum b_y q_y + c z``.

    ``a`` and ``b`` may be constants, per-direction sequences or callables
    of the coordinates returning ``(m,)`` or ``(m, K)``; ``c`` returns
    ``(m,)``.  With ``upwind`` the drift uses one-sided quotients in the
    direction of ``b``, which adds ``h|y||b|/2`` to the diffusion.
    """

    a: object = 1.0
    b: object = 0.0
    c: object = 0.0
    upwind: bool = False

    def partials(self, x, K, dist):
        a = _coef(self.a, x, K)
        b = _coef(self.b, x, K)
        c = _coef(self.c, x, None)
        if self.upwind:
            a = a + 0.5 * dist * np.abs(b)
        return c, b, a


def _linear_value(parts, z, q, s):
    dz, dq, ds = parts
    return dz * z + (dq * q).sum(axis=1) + (ds * s).sum(axis=1)


def _reduce(values, op):
    """Extremum over axis 0 and the index attaining it."""
    idx = np.argmax(values, axis=0) if op == "sup" else np.argmin(values, axis=0)
    return np.take_along_axis(values, idx[None], axis=0)[0], idx


def _select(stack, idx):
    return np.take_along_axis(stack, idx.reshape((1,) + idx.shape + (1,) * (stack.ndim - 2)),
                              axis=0)[0]


def _continuous_linear(coefs: Coefficients, dim):
    def op(x, z, p, M):
        diag = np.einsum("mkk->mk", M)
        parts = Coefficients(coefs.a, coefs.b, coefs.c).partials(x, dim, np.zeros(dim))
        return _linear_value(parts, z, p, diag)
    return op


def hjb(families: Sequence, outer: str = "sup", inner: str | None = None,
        dim: int = 1, name: str = "hjb", continuous=None) -> SchemeSpec:
    """``outer_alpha inner_beta L^{alpha beta}_h u`` over finite families.

    ``families`` is a list of :class:`Coefficients`; when ``inner`` is
    given each element is itself a list of :class:`Coefficients` and the
    inner extremum is taken within it.
    """
    if not families:
        raise EmptyFamily("hjb needs at least one coefficient family")
    if inner is None:
        groups = [[f] for f in families]
    else:
        groups = [list(g) for g in families]
        if any(not g for g in groups):
            raise EmptyFamily("empty inner family")
    for op in (outer, inner):
        if op not in ("sup", "inf", None):
            raise ValueError(f"unknown extremum {op!r}")
    stencil = Stencil.canonical(dim)
    norms = stencil.norms
    pieces = [p for g in groups for p in g]
    single = len(pieces) == 1

    def active(x, z, q, s, h):
        K = q.shape[1]
        dist = h * norms
        parts = [p.partials(x, K, dist) for p in pieces]
        vals = np.stack([_linear_value(pt, z, q, s) for pt in parts])
        dz = np.stack([np.broadcast_to(pt[0], z.shape) for pt in parts])
        dq = np.stack([pt[1] for pt in parts])
        ds = np.stack([pt[2] for pt in parts])
        # inner extremum within each group, then outer across groups
        starts = np.cumsum([0] + [len(g) for g in groups])
        best_vals, best_idx = [], []
        for g, (lo, hi) in enumerate(zip(starts[:-1], starts[1:])):
            if inner is None or hi - lo == 1:
                best_vals.append(vals[lo])
                best_idx.append(np.full(vals.shape[1], lo))
            else:
                v, i = _reduce(vals[lo:hi], inner)
                best_vals.append(v)
                best_idx.append(i + lo)
        v, gi = _reduce(np.stack(best_vals), outer)
        chosen = np.take_along_axis(np.stack(best_idx), gi[None], axis=0)[0]
        return v, (_select(dz, chosen), _select(dq, chosen), _select(ds, chosen))

    def evaluator(x, z, q, s, h):
        return active(x, z, q, s, h)[0]

    def partials(x, z, q, s, h):
        return active(x, z, q, s, h)[1]

    convex = single or (inner is None and outer == "sup") or (
        inner == "sup" and outer == "sup")
    concave = single or (inner is None and outer == "inf") or (
        inner == "inf" and outer == "inf")
    if continuous is None and single:
        continuous = _continuous_linear(pieces[0], dim)
    return SchemeSpec(name=name, evaluator=evaluator, stencil=stencil,
                      is_linear=single, is_convex_in_qs=convex, is_concave_in_qs=concave,
                      is_smooth=single, partials=partials, continuous=continuous,
                      params={"families": families, "outer": outer, "inner": inner})


def variable_coefficient(a=1.0, b=0.0, c=0.0, dim: int = 1, upwind: bool = False,
                         name: str = "variable_coefficient") -> SchemeSpec:
    """Linear scheme ``sum a s_y + sum b q_y + c z`` with central drift.

    Positive type requires ``a >= h|y||b|/2`` at every node; this is not
    enforced here (see :func:`check_positive_type`).  ``upwind=True``
    removes that restriction at the cost of first order accuracy.
    """
    scheme = hjb([Coefficients(a, b, c, upwind)], dim=dim, name=name)
    return replace(scheme, params={"a": a, "b": b, "c": c, "upwind": upwind})


def laplacian(n: int = 1) -> SchemeSpec:
    """Standard ``2n+1``-point Laplacian."""
    stencil = Stencil.canonical(n)

    def evaluator(x, z, q, s, h):
        return s.sum(axis=1)

    def partials(x, z, q, s, h):
        return np.zeros_like(z), np.zeros_like(q), np.ones_like(s)

    def continuous(x, z, p, M):
        return np.trace(M, axis1=1, axis2=2)

    return SchemeSpec(name="laplacian", evaluator=evaluator, stencil=stencil,
                      is_linear=True, is_convex_in_qs=True, is_concave_in_qs=True,
                      structure_constants=(1.0, 1.0, 0.0), partials=partials,
                      continuous=continuous, params={"dim": n})


def ornstein_uhlenbeck(n: int = 2) -> SchemeSpec:
    """``Delta u - x . Du`` with central first quotients."""
    scheme = variable_coefficient(1.0, lambda x: -x, 0.0, dim=n, name="ornstein_uhlenbeck")
    return replace(scheme, params={"dim": n})


def fucik(alpha: float, dim: int = 1) -> SchemeSpec:
    """``max{Lap u, Lap u / alpha}`` for ``alpha <= 1``, ``min`` otherwise."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    outer = "sup" if alpha <= 1 else "inf"

    def continuous(x, z, p, M):
        t = np.trace(M, axis1=1, axis2=2)
        return np.maximum(t, t / alpha) if outer == "sup" else np.minimum(t, t / alpha)

    scheme = hjb([Coefficients(1.0), Coefficients(1.0 / alpha)], outer=outer, dim=dim,
                 name="fucik", continuous=continuous)
    return replace(scheme, params={"alpha": alpha, "dim": dim},
                   structure_constants=(min(1.0, 1 / alpha), max(1.0, 1 / alpha), 0.0))


def pucci(a: float, A: float, sign: str = "plus", dim: int = 1) -> SchemeSpec:
    """Axis-aligned extremal operators.

    ``plus``:  ``sum_y A s_y^+ - a s_y^-``;  ``minus``: ``sum_y a s_y^+ - A s_y^-``.
    """
    if not 0 < a <= A:
        raise ValueError("need 0 < a <= A")
    if sign not in ("plus", "minus"):
        raise ValueError("sign must be 'plus' or 'minus'")
    hi, lo = (A, a) if sign == "plus" else (a, A)

    def weights(s):
        return np.where(s > 0, hi, lo)

    def evaluator(x, z, q, s, h):
        return (weights(s) * s).sum(axis=1)

    def partials(x, z, q, s, h):
        return np.zeros_like(z), np.zeros_like(q), weights(s)

    def continuous(x, z, p, M):
        d = np.einsum("mkk->mk", M)
        return (weights(d) * d).sum(axis=1)

    return SchemeSpec(name=f"pucci_{sign}", evaluator=evaluator,
                      stencil=Stencil.canonical(dim), is_linear=(a == A),
                      is_convex_in_qs=(sign == "plus" or a == A),
                      is_concave_in_qs=(sign == "minus" or a == A),
                      is_smooth=(a == A), structure_constants=(a, A, 0.0),
                      partials=partials, continuous=continuous,
                      params={"a": a, "A": A, "sign": sign, "dim": dim})


def p_laplace_1d(p: float) -> SchemeSpec:
    """Flux form ``(phi(d+ u) - phi(d- u)) / h`` with ``phi(t) = |t|^(p-2) t``.

    Positively homogeneous of degree ``p - 1``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")

    def phi(t):
        return np.abs(t) ** (p - 2) * t

    def dphi(t):
        with np.errstate(divide="ignore"):
            out = (p - 1) * np.abs(t) ** (p - 2)
        return np.minimum(out, 1e300)

    def evaluator(x, z, q, s, h):
        fwd = q + 0.5 * h * s
        bwd = q - 0.5 * h * s
        return ((phi(fwd) - phi(bwd)) / h).sum(axis=1)

    def partials(x, z, q, s, h):
        a = dphi(q + 0.5 * h * s)
        b = dphi(q - 0.5 * h * s)
        return np.zeros_like(z), (a - b) / h, 0.5 * (a + b)

    def continuous(x, z, grad, M):
        g = grad[:, 0]
        return (p - 1) * np.abs(g) ** (p - 2) * M[:, 0, 0]

    return SchemeSpec(name="p_laplace", evaluator=evaluator, stencil=Stencil.canonical(1),
                      homogeneity_degree=p - 1, is_linear=(p == 2),
                      is_convex_in_qs=(p == 2), is_concave_in_qs=(p == 2),
                      partials=partials, continuous=continuous, params={"p": p})


def reflect_scheme(scheme: SchemeSpec) -> SchemeSpec:
    """``G[u] = -F[-u]``; the principal eigenvalue of ``G`` is the
    eigenvalue of ``F`` with a negative eigenfunction."""
    if scheme.homogeneity_degree != 1:
        raise ValueError("reflection requires a degree-one scheme")
    F = scheme.evaluator

    def evaluator(x, z, q, s, h):
        return -F(x, -z, -q, -s, h)

    P, C = scheme.partials, scheme.continuous

    def partials(x, z, q, s, h):
        return P(x, -z, -q, -s, h)

    def continuous(x, z, p, M):
        return -C(x, -z, -p, -M)

    return replace(scheme, name=f"reflect({scheme.name})", evaluator=evaluator,
                   partials=partials if P is not None else None,
                   continuous=continuous if C is not None else None,
                   is_convex_in_qs=scheme.is_concave_in_qs,
                   is_concave_in_qs=scheme.is_convex_in_qs,
                   params={"reflected": scheme.name, **scheme.params})


# ---------------------------------------------------------------------------
# structural checks


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_margin: float = float("nan")
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in self.details.items())
        return f"[{status}] {self.name}" + (f" ({extra})" if extra else "")


def _samples(grid, count, rng, scale=1.0):
    K = len(grid.stencil.directions)
    nodes = rng.integers(0, grid.n_interior, size=count)
    x = grid.interior_points[nodes]
    z = rng.normal(size=count) * scale
    q = rng.normal(size=(count, K)) * scale
    s = rng.normal(size=(count, K)) * scale
    return x, z, q, s


def check_positive_type(scheme: SchemeSpec, grid: Grid, sample_count: int = 200,
                        seed=0, tol: float = 1e-8) -> CheckReport:
    """Test ``dF/ds_y - (h|y|/2)|dF/dq_y| >= 0`` and ``dF/dz <= 0``.

    Derivatives are central differences at seeded random samples.
    Non-smooth schemes are additionally probed with the monotonicity
    inequality itself: raising neighbour values never lowers ``F_h`` and
    raising ``z`` alone never raises it.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    x, z, q, s = _samples(grid, sample_count, rng)
    dz, dq, ds = finite_difference_partials(scheme.evaluator, x, z, q, s, grid.h)
    dist = grid.step_lengths
    margins = ds - 0.5 * dist * np.abs(dq)
    worst = float(margins.min())
    worst_dz = float(dz.max())
    passed = worst >= -tol and worst_dz <= tol
    details = {"worst_margin": worst, "max_dF_dz": worst_dz}
    if not scheme.is_smooth:
        drop = _monotonicity_violation(scheme, grid, sample_count, rng)
        details["max_monotonicity_drop"] = drop
        passed = passed and drop <= tol
    return CheckReport("positive_type", passed, worst, details)


def _monotonicity_violation(scheme, grid, count, rng):
    """Largest decrease of F_h under nonnegative neighbour increments."""
    K = len(grid.stencil.directions)
    dist = grid.step_lengths
    nodes = rng.integers(0, grid.n_interior, size=count)
    x = grid.interior_points[nodes]
    centre = rng.normal(size=count)
    up = rng.normal(size=(count, K))
    down = rng.normal(size=(count, K))

    def F(c, zc, u, d):
        q = ((u - c[:, None]) + (c[:, None] - d)) / (2 * dist)
        s = (u + d - 2 * c[:, None]) / dist**2
        return scheme.evaluator(x, zc, q, s, grid.h)

    base = F(centre, centre, up, down)
    eta_up = rng.exponential(size=(count, K)) * (rng.random((count, K)) < 0.7)
    eta_down = rng.exponential(size=(count, K)) * (rng.random((count, K)) < 0.7)
    raised = F(centre, centre, up + eta_up, down + eta_down)
    scale = 1.0 + np.abs(base)
    drop = np.max((base - raised) / scale)
    tau = rng.exponential(size=count)
    shifted = F(centre, centre + tau, up, down)
    rise = np.max((shifted - base) / scale)
    return float(max(drop, rise, 0.0))


def check_homogeneity(scheme: SchemeSpec, grid: Grid, sample_count: int = 50, seed=0,
                      rtol: float = 1e-10) -> CheckReport:
    """Test ``F(x, tz, tq, ts) == t^d F(x, z, q, s)`` for ``t in {0, .5, 2, 7}``."""
    rng = np.random.default_rng(seed)
    x, z, q, s = _samples(grid, sample_count, rng)
    d = scheme.homogeneity_degree
    base = scheme.evaluator(x, z, q, s, grid.h)
    worst = 0.0
    for t in (0.0, 0.5, 2.0, 7.0):
        got = scheme.evaluator(x, t * z, t * q, t * s, grid.h)
        want = t**d * base
        err = np.abs(got - want) / np.maximum(np.maximum(np.abs(got), np.abs(want)), 1e-300)
        err = np.where(np.abs(got - want) <= 1e-14 * t**d * (1 + np.abs(base)), 0.0, err)
        worst = max(worst, float(err.max()))
    return CheckReport("homogeneity", worst <= rtol, details={"worst_relative_error": worst,
                                                              "degree": float(d)})


@dataclass(frozen=True)
class SmoothFunction:
    """A test function with analytic derivatives, all vectorized over points."""

    value: Callable
    gradient: Callable
    hessian: Callable


def check_consistency(scheme: SchemeSpec, continuous_operator=None,
                      test_function: SmoothFunction | None = None,
                      h_list: Sequence[float] = (0.1, 0.05, 0.025),
                      domain: BoxDomain | None = None) -> CheckReport:
    """Sup-norm truncation error of ``F_h`` against ``F`` on a test function.

    ``observed_order`` holds ``log(e_i/e_{i+1}) / log(h_i/h_{i+1})``.
    """
    op = continuous_operator or scheme.continuous
    if op is None:
        raise ValueError(f"no continuous operator known for {scheme.name!r}")
    dim = scheme.stencil.dim
    domain = domain or BoxDomain.cube(0.0, 1.0, dim)
    if test_function is None:
        test_function = sine_product(domain)
    errors = []
    for h in h_list:
        grid = build_grid(domain, h, scheme.stencil)
        u = test_function.value(grid.points)
        x = grid.interior_points
        exact = op(x, test_function.value(x), test_function.gradient(x),
                   test_function.hessian(x))
        errors.append(float(np.max(np.abs(exact - apply(scheme, grid, u)))))
    orders = observed_orders(list(h_list), errors)
    passed = bool(np.all(np.isfinite(errors))) and errors[-1] < errors[0]
    return CheckReport("consistency", passed,
                       details={"sup_errors": errors, "observed_order": orders})


def observed_orders(h_list, errors):
    """Convergence orders between consecutive entries (``None`` if undefined)."""
    out = []
    for (h0, e0), (h1, e1) in zip(zip(h_list, errors), zip(h_list[1:], errors[1:])):
        if e0 > 0 and e1 > 0 and h0 != h1:
            out.append(float(np.log(e0 / e1) / np.log(h0 / h1)))
        else:
            out.append(None)
    return out


def sine_product(domain: BoxDomain) -> SmoothFunction:
    """``prod_k sin(pi (x_k - a_k) / (b_k - a_k))`` with derivatives."""
    lo = np.asarray(domain.lower)
    w = np.pi / domain.widths

    def parts(x):
        t = (np.atleast_2d(x) - lo) * w
        return np.sin(t), np.cos(t)

    def value(x):
        return parts(x)[0].prod(axis=1)

    def gradient(x):
        sn, cs = parts(x)
        n = sn.shape[1]
        g = np.empty_like(sn)
        for k in range(n):
            g[:, k] = w[k] * cs[:, k] * np.prod(np.delete(sn, k, axis=1), axis=1)
        return g

    def hessian(x):
        sn, cs = parts(x)
        m, n = sn.shape
        H = np.empty((m, n, n))
        for i in range(n):
            for j in range(n):
                f = np.ones(m)
                for k in range(n):
                    if k == i and k == j:
                        f = f * (-w[k] ** 2 * sn[:, k])
                    elif k in (i, j):
                        f = f * (w[k] * cs[:, k])
                    else:
                        f = f * sn[:, k]
                H[:, i, j] = f
        return H

    return SmoothFunction(value, gradient, hessian)
