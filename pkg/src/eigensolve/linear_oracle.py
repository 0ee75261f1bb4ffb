"""Oracles for linear schemes.

The interior matrix ``A`` (Dirichlet columns eliminated) is assembled from
the scheme, and ``lambda_{1,h}`` is read off either by shifted inverse power
iteration -- the discrete Krein-Rutman setting guarantees a simple, positive
dominant eigenvector of ``-(A - xi I)^{-1}`` -- or, on small grids, from the
full dense spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as sla

from .errors import (EigensolveError, NoConvergence, NoPositiveEigenvector, NotLinear,
                     SingularShift, SizeGuard)
from .grid import Grid, MeshFunction
from .schemes import SchemeSpec, apply, jacobian

DENSE_GUARD = 400


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Interior matrix of a linear scheme; ``matrix @ U == F_h[U]`` for
    mesh functions vanishing on the boundary."""

    matrix: sparse.csr_matrix
    grid: Grid
    scheme: SchemeSpec

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def sign_structure(self) -> tuple[bool, float, float]:
        """``(ok, min off-diagonal, max diagonal)``; ``ok`` means off-diagonal
        entries are nonnegative and the diagonal is negative."""
        A = self.matrix.tocoo()
        off = A.row != A.col
        min_off = float(A.data[off].min()) if off.any() else 0.0
        max_diag = float(self.matrix.diagonal().max())
        return (min_off >= 0 and max_diag < 0), min_off, max_diag


def check_linearity(scheme: SchemeSpec, grid: Grid, seed=0, rtol: float = 1e-10) -> bool:
    """Collinearity of ``F(u), F(u + v), F(u + 2v)``, ``F(0) = 0`` and
    ``F(tu) = t F(u)`` for random ``u, v`` vanishing on the boundary."""
    rng = np.random.default_rng(seed)
    N = grid.n_interior
    u = np.zeros(grid.n_nodes)
    v = np.zeros(grid.n_nodes)
    u[:N] = rng.normal(size=N)
    v[:N] = rng.normal(size=N)
    f0 = apply(scheme, grid, u)
    f1 = apply(scheme, grid, u + v)
    f2 = apply(scheme, grid, u + 2 * v)
    zero = apply(scheme, grid, np.zeros(grid.n_nodes))
    scaled = apply(scheme, grid, -2.5 * u)
    scale = max(np.abs(f0).max(), np.abs(f1).max(), np.abs(f2).max(), 1.0)
    return bool(np.abs(f2 - 2 * f1 + f0).max() <= rtol * scale
                and np.abs(zero).max() <= rtol * scale
                and np.abs(scaled + 2.5 * f0).max() <= rtol * scale)


def _probe_matrix(scheme: SchemeSpec, grid: Grid) -> sparse.csr_matrix:
    """Assemble by applying the scheme to colour-class indicator functions.

    Nodes whose multi-indices agree modulo ``2M + 1`` share a colour; no
    stencil contains two nodes of one colour, so each probe reads off one
    matrix entry per (row, colour).
    """
    N = grid.n_interior
    period = 2 * grid.stencil.reach + 1
    colour_idx = grid.interior_index % period
    colours = np.ravel_multi_index(colour_idx.T, (period,) * grid.dim)
    nb = np.concatenate([np.arange(N)[:, None], grid.plus, grid.minus], axis=1)
    rows, cols, vals = [], [], []
    for col in np.unique(colours):
        u = np.zeros(grid.n_nodes)
        u[:N][colours == col] = 1.0
        out = apply(scheme, grid, u)
        for i, j in zip(*np.nonzero((nb < N) & (colours[np.minimum(nb, N - 1)] == col))):
            rows.append(i)
            cols.append(nb[i, j])
            vals.append(out[i])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(N, N))


def assemble_matrix(scheme: SchemeSpec, grid: Grid, method: str = "direct",
                    seed=0) -> LinearSystem:
    """Interior matrix of a linear scheme.

    ``method="direct"`` places the coefficients returned by the scheme's
    partial derivatives; ``method="probe"`` evaluates the scheme on
    indicator functions.  Both give the same matrix.

    Raises
    ------
    NotLinear
        If the scheme is not flagged linear or fails the probing test.
    """
    if not scheme.is_linear:
        raise NotLinear(f"operator is not linear: {scheme.name!r}")
    if not check_linearity(scheme, grid, seed=seed):
        raise NotLinear(f"operator is not linear: {scheme.name!r} failed the linearity probe")
    if method == "direct":
        _, J = jacobian(scheme, grid, np.zeros(grid.n_nodes))
        A = J[:, : grid.n_interior].tocsr()
    elif method == "probe":
        A = _probe_matrix(scheme, grid)
    else:
        raise ValueError(f"unknown assembly method {method!r}")
    A.eliminate_zeros()
    return LinearSystem(A, grid, scheme)


def default_shift(system: LinearSystem) -> float:
    """``max(0, max_x c(x)) + 1`` with ``c`` the zero-order coefficient."""
    grid = system.grid
    N = grid.n_interior
    K = len(grid.stencil.directions)
    dz, _, _ = system.scheme.derivatives(grid.interior_points, np.zeros(N),
                                         np.zeros((N, K)), np.zeros((N, K)), grid.h)
    return max(0.0, float(np.max(dz))) + 1.0


def inverse_power(system: LinearSystem, shift: float | None = None, tol: float = 1e-12,
                  max_iter: int = 2000):
    """Shifted inverse power iteration.

    Iterates ``w <- -(A - xi I)^{-1} w`` in the max norm from ``w = 1``;
    the dominant eigenvalue ``rho`` of that operator gives
    ``lambda = 1/rho - xi``.  Stops when successive eigenvalue estimates
    differ by at most ``tol (1 + |lambda|)`` and
    ``|A w + lambda w|_inf <= tol ||A||_inf``.

    Returns
    -------
    lam : float
    w : MeshFunction
        Positive eigenvector, max-norm one, zero on the boundary.
    """
    A = system.matrix
    N = system.size
    xi = default_shift(system) if shift is None else float(shift)
    try:
        lu = sla.splu((A - xi * sparse.identity(N, format="csr")).tocsc())
    except RuntimeError as exc:
        raise SingularShift(f"A - {xi} I is singular") from exc
    norm_A = float(abs(A).sum(axis=1).max())
    w = np.ones(N)
    lam_old = np.inf
    for _ in range(max_iter):
        z = -lu.solve(w)
        if not np.all(np.isfinite(z)):
            raise SingularShift(f"A - {xi} I is numerically singular")
        rho = float(w @ z / (w @ w))
        w = z / np.abs(z).max()
        lam = float(-(w @ (A @ w)) / (w @ w))
        if abs(lam - lam_old) <= tol * (1 + abs(lam)):
            if np.abs(A @ w + lam * w).max() <= tol * max(norm_A, 1.0):
                break
        lam_old = lam
    else:
        raise NoConvergence(f"inverse power iteration did not converge in {max_iter} steps")
    if rho <= 0:
        raise SingularShift("shift does not make the iteration operator positive")
    if w.sum() < 0:
        w = -w
    return lam, MeshFunction.from_interior(system.grid, w / np.abs(w).max())


@dataclass(frozen=True)
class DenseSpectrum:
    eigenvalues: np.ndarray  # of -A, sorted by real part
    principal_value: float
    principal_vector: MeshFunction
    gap: float


def dense_spectrum(system: LinearSystem, guard: int = DENSE_GUARD) -> DenseSpectrum:
    """All eigenvalues of ``-A`` and the one with a positive eigenvector.

    Raises
    ------
    SizeGuard
        When the system has more than ``guard`` unknowns.
    NoPositiveEigenvector
        When no eigenvector can be signed strictly positive.
    """
    if system.size > guard:
        raise SizeGuard(f"{system.size} unknowns exceed the dense guard of {guard}")
    vals, vecs = np.linalg.eig(-system.matrix.toarray())
    order = np.argsort(vals.real)
    vals, vecs = vals[order], vecs[:, order]
    scale = max(float(np.abs(vals).max()), 1.0)
    principal = None
    for j in range(len(vals)):
        if abs(vals[j].imag) > 1e-10 * scale:
            continue
        v = vecs[:, j].real
        v = v / v[np.argmax(np.abs(v))]
        if v.min() > 1e-12:
            principal = j
            break
    if principal is None:
        raise NoPositiveEigenvector("no eigenvector of the dense spectrum is positive")
    mu = float(vals[principal].real)
    others = np.delete(vals, principal)
    gap = float(np.abs(others - mu).min()) if len(others) else np.inf
    if gap <= 1e-10 * scale:
        raise EigensolveError(f"principal eigenvalue {mu} is not simple (gap {gap:.3g})")
    w = MeshFunction.from_interior(system.grid, v / v.max())
    return DenseSpectrum(eigenvalues=vals, principal_value=mu, principal_vector=w, gap=gap)
