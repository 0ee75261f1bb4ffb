"""Convergence studies over sequences of grid spacings.

Each row solves one grid, compares with the exact eigenpair (both
eigenfunctions scaled to max-norm one) and records the observed order
``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` against the previous row.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import EigensolveError, NoConvergence
from .grid import BoxDomain, MeshFunction, Stencil, build_grid
from .minimax import EigenResult, MinimaxConfig, solve_eigen
from .problems import EXAMPLES, ExactSolution
from .schemes import SchemeSpec

CSV_HEADER = ("h", "lambda", "err_lambda", "order_lambda", "err_inf_w", "err_l2_w",
              "residual", "wall_time_s")
THREADS_ENV = "EIGENSOLVE_THREADS"


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    lam: float
    err_lambda: float | None
    order_lambda: float | None
    err_inf_w: float | None
    err_l2_w: float | None
    residual: float
    wall_time: float
    error: str | None = None

    def values(self) -> tuple:
        return (self.h, self.lam, self.err_lambda, self.order_lambda, self.err_inf_w,
                self.err_l2_w, self.residual, self.wall_time)


@dataclass
class ConvergenceReport:
    """Rows ordered by decreasing ``h``; ``results`` keeps the eigenpairs."""

    rows: list = field(default_factory=list)
    results: list = field(default_factory=list, repr=False)

    @property
    def h(self) -> np.ndarray:
        return np.array([r.h for r in self.rows])

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.rows])

    @property
    def errors(self) -> np.ndarray:
        return np.array([np.nan if r.err_lambda is None else r.err_lambda for r in self.rows])

    @property
    def orders(self) -> list:
        return [r.order_lambda for r in self.rows]

    @property
    def failures(self) -> list:
        return [r for r in self.rows if r.error is not None]


def observed_order(h_coarse: float, h_fine: float, e_coarse: float, e_fine: float):
    """Observed order between two rows, or ``None`` when undefined."""
    if not (e_coarse and e_fine) or e_coarse <= 0 or e_fine <= 0 or h_coarse == h_fine:
        return None
    if not (math.isfinite(e_coarse) and math.isfinite(e_fine)):
        return None
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


def _sampled(w, grid):
    if isinstance(w, MeshFunction):
        return w.values
    return np.asarray(w(grid.points), float).reshape(grid.n_nodes)


def _unit(values):
    peak = np.abs(values).max()
    return values / peak if peak > 0 else values


def error_norms(w_h: MeshFunction, w_exact) -> tuple[float, float]:
    """``(max |w_h - w*|, sqrt(h^n sum (w_h - w*)^2))`` over interior nodes.

    ``w_exact`` is a callable of coordinates or a mesh function on the same
    grid.  Both functions are scaled to max-norm one first (a vanishing
    function is left as is).
    """
    grid = w_h.grid
    diff = (_unit(w_h.values) - _unit(_sampled(w_exact, grid)))[: grid.n_interior]
    err_inf = float(np.abs(diff).max()) if diff.size else 0.0
    err_l2 = float(math.sqrt(grid.h**grid.dim * float(diff @ diff)))
    return err_inf, err_l2


def _worker_count(n_rows: int, max_workers: int | None) -> int:
    if max_workers is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        try:
            max_workers = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if max_workers <= 0:
        max_workers = os.cpu_count() or 1
    return max(1, min(max_workers, n_rows))


def run_convergence(scheme: SchemeSpec, domain: BoxDomain, h_list: Sequence[float],
                    exact: ExactSolution | None = None, config: MinimaxConfig | None = None,
                    stencil: Stencil | None = None, max_workers: int | None = None,
                    solver: Callable | None = None) -> ConvergenceReport:
    """Solve on every ``h`` and tabulate errors and observed orders.

    A row whose solve fails is kept with ``error`` set and ``NaN`` values;
    the remaining rows still run.  Rows may run concurrently (see
    ``EIGENSOLVE_THREADS``); the report is ordered by decreasing ``h``
    regardless.

    Parameters
    ----------
    solver : callable, optional
        ``solver(scheme, grid, config) -> EigenResult``; defaults to the
        minimax solver.
    """
    solver = solver or (lambda s, g, c: solve_eigen(s, g, c))
    hs = sorted((float(h) for h in h_list), reverse=True)
    grids = [build_grid(domain, h, stencil or scheme.stencil) for h in hs]

    def one(grid):
        start = time.perf_counter()
        try:
            result, error = solver(scheme, grid, config), None
        except NoConvergence as exc:
            result, error = exc.result, str(exc)
        except EigensolveError as exc:
            result, error = None, f"{type(exc).__name__}: {exc}"
        return result, error, time.perf_counter() - start

    workers = _worker_count(len(grids), max_workers)
    if workers == 1:
        outcomes = [one(g) for g in grids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, grids))

    report = ConvergenceReport()
    prev = None
    for h, (result, error, wall) in zip(hs, outcomes):
        if result is None:
            row = ConvergenceRow(h, math.nan, None, None, None, None, math.nan, wall, error)
        else:
            err = abs(result.eigenvalue - exact.lambda_exact) if exact else None
            e_inf = e_l2 = None
            if exact and exact.eigenfunction_exact is not None:
                e_inf, e_l2 = error_norms(result.eigenfunction, exact.eigenfunction_exact)
            order = None
            if prev is not None and err is not None and prev.err_lambda is not None:
                order = observed_order(prev.h, h, prev.err_lambda, err)
            row = ConvergenceRow(h, result.eigenvalue, err, order, e_inf, e_l2,
                                 result.residual, wall, error)
        report.rows.append(row)
        report.results.append(result)
        prev = row if row.error is None else None
    return report


def run_example(name: str, h_list: Sequence[float] | None = None,
                config: MinimaxConfig | None = None, **kwargs) -> ConvergenceReport:
    """Convergence study of a named reference example."""
    ex = EXAMPLES[name]
    return run_convergence(ex.scheme(), ex.domain, h_list or ex.h_list, ex.exact, config,
                           **kwargs)


def _format(value) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


def _atomic_write(path, write_rows):
    path = Path(path)
    try:
        directory = path.parent if str(path.parent) else Path(".")
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                write_rows(csv.writer(fh, lineterminator="\n"))
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_csv(report: ConvergenceReport, path) -> Path:
    """Write the report with the fixed header; absent values are empty fields."""
    def rows(writer):
        writer.writerow(CSV_HEADER)
        for row in report.rows:
            writer.writerow([_format(v) for v in row.values()])
    return _atomic_write(path, rows)


def emit_eigenfunction(result: EigenResult | MeshFunction, path) -> Path:
    """One row per stored node in lexicographic order: coordinates, then value."""
    w = result.eigenfunction if isinstance(result, EigenResult) else result
    grid = w.grid
    order = grid.lexicographic_order()
    points = grid.points

    def rows(writer):
        writer.writerow([f"x{k + 1}" for k in range(grid.dim)] + ["value"])
        for slot in order:
            writer.writerow([_format(c) for c in points[slot]] + [_format(w.values[slot])])
    return _atomic_write(path, rows)
