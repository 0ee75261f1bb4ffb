"""Lattice discretization of box domains.

Nodes are stored as integer multi-indices ``i`` and mapped to coordinates
``lower + h * i`` only on output, so node identity never depends on floating
point comparisons.  Storage slots ``0 .. N-1`` hold the interior nodes and
``N .. N+B-1`` the boundary nodes, each block in lexicographic order of the
multi-index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyInterior, NonConformingSpacing

_CONFORMITY_RTOL = 1e-9


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned open box ``prod_k (lower[k], upper[k])``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper) or not lower:
            raise ValueError("lower and upper must be non-empty and of equal length")
        if any(lo >= up for lo, up in zip(lower, upper)):
            raise ValueError(f"degenerate box: lower={lower}, upper={upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    @classmethod
    def cube(cls, lower: float, upper: float, dim: int) -> "BoxDomain":
        return cls((lower,) * dim, (upper,) * dim)


@dataclass(frozen=True)
class Stencil:
    """Finite set of lattice directions used by a scheme."""

    directions: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        dirs = tuple(tuple(int(c) for c in y) for y in self.directions)
        if not dirs:
            raise ValueError("stencil must contain at least one direction")
        n = len(dirs[0])
        if any(len(y) != n for y in dirs):
            raise ValueError("stencil directions have inconsistent dimension")
        if any(not any(y) for y in dirs):
            raise ValueError("stencil contains the zero vector")
        if len(set(dirs)) != len(dirs):
            raise ValueError("stencil contains a repeated direction")
        for k in range(n):
            e = tuple(int(j == k) for j in range(n))
            if e not in dirs:
                raise ValueError(f"stencil is missing the basis vector {e}")
        object.__setattr__(self, "directions", dirs)

    @classmethod
    def canonical(cls, dim: int) -> "Stencil":
        return cls(tuple(tuple(int(j == k) for j in range(dim)) for k in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.directions[0])

    @property
    def reach(self) -> int:
        return int(np.abs(self.array).max())

    @property
    def array(self) -> np.ndarray:
        return np.array(self.directions, dtype=int)

    @property
    def norms(self) -> np.ndarray:
        """Euclidean length ``|y|`` of each direction."""
        return np.linalg.norm(self.array, axis=1)

    def position(self, y: Sequence[int]) -> int:
        return self.directions.index(tuple(int(c) for c in y))


@dataclass(frozen=True, eq=False)
class Grid:
    """Interior and boundary nodes of ``h Z^n`` inside a closed box.

    Attributes
    ----------
    h : float
        Lattice spacing.
    domain, stencil
        Inputs of :func:`build_grid`.
    counts : ndarray of int
        Number of cells per axis, ``width / h``.
    interior_index, boundary_index : ndarray of int, shape (N, n) / (B, n)
        Integer multi-indices, lexicographically sorted.
    plus, minus : ndarray of int, shape (N, K)
        Storage slots of ``x + h y`` and ``x - h y`` for every interior node
        and stencil direction.
    """

    h: float
    domain: BoxDomain
    stencil: Stencil
    counts: np.ndarray
    interior_index: np.ndarray
    boundary_index: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    _lookup: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def n_interior(self) -> int:
        return len(self.interior_index)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_index)

    @property
    def n_nodes(self) -> int:
        return self.n_interior + self.n_boundary

    @property
    def index(self) -> dict:
        """Map from multi-index tuple to storage slot."""
        return self._lookup

    @property
    def node_index(self) -> np.ndarray:
        return np.vstack([self.interior_index, self.boundary_index])

    @property
    def points(self) -> np.ndarray:
        """Coordinates of every stored node, interior first."""
        return np.asarray(self.domain.lower) + self.h * self.node_index

    @property
    def interior_points(self) -> np.ndarray:
        return np.asarray(self.domain.lower) + self.h * self.interior_index

    @property
    def boundary_points(self) -> np.ndarray:
        return np.asarray(self.domain.lower) + self.h * self.boundary_index

    @property
    def step_lengths(self) -> np.ndarray:
        """``h |y|`` for every stencil direction."""
        return self.h * self.stencil.norms

    def slot(self, point: Sequence[float]) -> int:
        """Storage slot of the node at ``point`` (coordinates)."""
        i = np.rint((np.asarray(point, float) - self.domain.lower) / self.h).astype(int)
        try:
            return self._lookup[tuple(i)]
        except KeyError:
            raise KeyError(f"{tuple(point)} is not a stored node") from None

    def lexicographic_order(self) -> np.ndarray:
        """Slots of all stored nodes sorted by multi-index."""
        idx = self.node_index
        return np.lexsort(idx.T[::-1])

    def sample(self, fn: Callable[[np.ndarray], np.ndarray]) -> "MeshFunction":
        """Mesh function with values ``fn(points)`` on every stored node."""
        return MeshFunction(self, np.asarray(fn(self.points), float).reshape(self.n_nodes))

    def zeros(self) -> "MeshFunction":
        return MeshFunction(self, np.zeros(self.n_nodes))

    def __repr__(self):
        return (f"Grid(h={self.h!r}, domain={self.domain}, interior={self.n_interior}, "
                f"boundary={self.n_boundary})")


@dataclass(eq=False)
class MeshFunction:
    """Real values on every stored node of a grid, in slot order."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"expected {self.grid.n_nodes} values, got shape {self.values.shape}")

    @property
    def interior(self) -> np.ndarray:
        return self.values[: self.grid.n_interior]

    @property
    def boundary(self) -> np.ndarray:
        return self.values[self.grid.n_interior:]

    @classmethod
    def from_interior(cls, grid: Grid, interior, boundary=0.0) -> "MeshFunction":
        values = np.empty(grid.n_nodes)
        values[: grid.n_interior] = interior
        values[grid.n_interior:] = boundary
        return cls(grid, values)

    def copy(self) -> "MeshFunction":
        return MeshFunction(self.grid, self.values.copy())


def build_grid(domain: BoxDomain, h: float, stencil: Stencil | None = None) -> Grid:
    """Build the lattice ``h Z^n`` restricted to the closed box.

    A node is interior when ``x +- h y`` stays in the closed box for every
    stencil direction ``y``.  Boundary nodes are the remaining lattice nodes
    reached from some interior node; unreferenced lattice nodes (e.g. the
    corners of a square under the five-point stencil) are dropped.

    Raises
    ------
    NonConformingSpacing
        If some box width is not an integer multiple of ``h``.
    EmptyInterior
        If no node qualifies as interior.
    """
    if stencil is None:
        stencil = Stencil.canonical(domain.dim)
    if stencil.dim != domain.dim:
        raise ValueError("stencil and domain dimensions differ")
    h = float(h)
    if not h > 0:
        raise ValueError("h must be positive")
    ratio = domain.widths / h
    counts = np.rint(ratio).astype(int)
    if np.any(counts < 1) or np.any(np.abs(ratio - counts) > _CONFORMITY_RTOL * ratio):
        raise NonConformingSpacing(
            f"box widths {domain.widths.tolist()} are not integer multiples of h={h}")

    dirs = stencil.array
    reach = np.abs(dirs).max(axis=0)
    shape = tuple(counts + 1)
    lattice = np.indices(shape).reshape(domain.dim, -1).T  # lexicographic already
    inside = np.all((lattice >= reach) & (lattice <= counts - reach), axis=1)
    interior = lattice[inside]
    if len(interior) == 0:
        raise EmptyInterior(f"no interior nodes for h={h} on {domain}")

    neighbours = np.concatenate([interior[:, None, :] + dirs, interior[:, None, :] - dirs], axis=1)
    flat_nb = np.ravel_multi_index(neighbours.reshape(-1, domain.dim).T, shape)
    referenced = np.zeros(lattice.shape[0], dtype=bool)
    referenced[flat_nb] = True
    boundary = lattice[referenced & ~inside]

    slots = np.full(lattice.shape[0], -1, dtype=int)
    slots[inside] = np.arange(len(interior))
    slots[referenced & ~inside] = len(interior) + np.arange(len(boundary))
    nb_slots = slots[flat_nb].reshape(len(interior), 2, len(dirs))

    lookup = {tuple(int(c) for c in node): s
              for s, node in enumerate(np.vstack([interior, boundary]))}
    return Grid(h=h, domain=domain, stencil=stencil, counts=counts,
                interior_index=interior, boundary_index=boundary,
                plus=nb_slots[:, 0, :], minus=nb_slots[:, 1, :], _lookup=lookup)


def neighbors(grid: Grid, node: int, y: Sequence[int]) -> tuple[int, int]:
    """Slots of ``x + h y`` and ``x - h y`` for the interior slot ``node``."""
    k = grid.stencil.position(y)
    return int(grid.plus[node, k]), int(grid.minus[node, k])
