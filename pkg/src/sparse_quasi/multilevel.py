"""Multilevel residual correction over nested sparse grids (Q-MuSIK).

Level 0 is the plain sparse quasi-interpolant at level ``n0``.  Each further
level ``j`` samples the residual ``u - S_{j-1}`` on the nodes of every
subgrid of sparse level ``n0 + j`` and adds its quasi-interpolant.  The same
loop on isotropic full grids gives the multilevel full-grid baseline.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError
from .kernel import KernelSpec
from .metrics import error_metrics
from .multiindex_grid import (
    as_multiindex,
    full_grid_index,
    grid_points,
    nodes_visited,
    sparse_grid,
    sparse_grid_size,
)
from .quasi_ops import (
    FullGridOperator,
    NodeTable,
    SubgridOperator,
    Target,
    check_finite,
    combine_terms,
    lattice_points,
    sample,
    uniform_axes,
)


@dataclass
class BenchRecord:
    """One row of a level sweep.  Unused error fields stay ``None``."""

    level: int
    sgs: int
    novs: int
    max_error: float | None = None
    rms_error: float | None = None
    abs_error: float | None = None
    value: float | None = None
    seconds: float = 0.0


TRACE_COLUMNS = ("level", "sgs", "novs", "max_error", "rms_error", "seconds")


def format_number(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


class LevelTrace(list):
    """Per-level :class:`BenchRecord` list with strictly increasing levels."""

    def append(self, rec: BenchRecord):
        if self and rec.level <= self[-1].level:
            raise ValueError("trace levels must be strictly increasing")
        super().append(rec)

    def to_csv(self, columns: Sequence[str] = TRACE_COLUMNS) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for rec in self:
            row = asdict(rec)
            w.writerow([format_number(row[c]) for c in columns])
        return buf.getvalue()


@dataclass(frozen=True)
class MultilevelApproximant:
    """Accumulated approximant ``S = sum_j deltas[j]``; delta ``j`` lives on level ``n0 + j``."""

    n0: int
    d: int
    spec: KernelSpec
    deltas: tuple = field(repr=False)

    @property
    def levels(self) -> int:
        """Number of correction levels after the first approximation."""
        return len(self.deltas) - 1

    @property
    def nodes_used(self) -> int:
        return sum(delta.nodes_used for delta in self.deltas)

    def partial(self, j: int) -> "MultilevelApproximant":
        """Approximant after ``j`` corrections (``S_j``)."""
        if not 0 <= j < len(self.deltas):
            raise IndexError(j)
        return MultilevelApproximant(self.n0, self.d, self.spec, self.deltas[: j + 1])

    def evaluate(self, x, threads: int | None = None):
        out = None
        for delta in self.deltas:
            v = np.asarray(delta.evaluate(x, threads=threads))
            out = v if out is None else out + v
        return float(out) if np.ndim(out) == 0 else out

    def evaluate_grid(self, axes, threads: int | None = None) -> np.ndarray:
        out = None
        for delta in self.deltas:
            v = delta.evaluate_grid(axes, threads=threads)
            out = v if out is None else out + v
        return out


def eval_multilevel(S: MultilevelApproximant, x, threads: int | None = None):
    return S.evaluate(x, threads)


def _resolve_axes(eval_grid, d):
    if eval_grid is None:
        return None
    if isinstance(eval_grid, (int, np.integer)):
        return uniform_axes(int(eval_grid), d)
    axes = [np.asarray(a, dtype=float) for a in eval_grid]
    if len(axes) != d:
        raise DimensionError(f"evaluation grid has {len(axes)} axes, problem has d={d}")
    return axes


def _exact_table(u, exact, axes):
    if axes is None:
        return None
    if exact is not None:
        if callable(exact):
            return np.asarray(exact(lattice_points(axes)), dtype=float).reshape([len(a) for a in axes])
        return np.asarray(exact, dtype=float).reshape([len(a) for a in axes])
    if callable(u) and not isinstance(u, NodeTable):
        return np.asarray(u(lattice_points(axes)), dtype=float).reshape([len(a) for a in axes])
    return None


def _residual_sampler(u, S, level, threads):
    def values_for(l):
        vals = sample(u, l, check=False)
        if S is not None:
            vals = vals - S.evaluate_grid(grid_points(l).axes, threads=1)
        check_finite(vals, as_multiindex(l), what="residual", level=level)
        return vals

    return values_for


def _memoized_sampler(u, S, n, d, level):
    """Residual sampler that evaluates ``S`` once per distinct sparse-grid node."""
    sg = sparse_grid(n, d)
    prev = np.asarray(S.evaluate(sg.points))
    lookup = {tuple(k): i for i, k in enumerate(sg.numerators.tolist())}

    def values_for(l):
        l = as_multiindex(l)
        grid = grid_points(l)
        rows = grid.numerators(n).tolist()
        s_vals = prev[[lookup[tuple(r)] for r in rows]].reshape(grid.shape)
        vals = sample(u, l, check=False) - s_vals
        check_finite(vals, l, what="residual", level=level)
        return vals

    return values_for


def _run_levels(u, n0, levels, d, spec, eval_grid, exact, build_delta, counts, trace_cb=None):
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    if levels < 0:
        raise ValueError("levels must be >= 0")
    axes = _resolve_axes(eval_grid, d)
    exact_vals = _exact_table(u, exact, axes)
    trace = LevelTrace()
    deltas: list = []
    grid_vals = None
    S = None
    start = time.perf_counter()
    for j in range(levels + 1):
        n = n0 + j
        delta = build_delta(n, S, j)
        deltas.append(delta)
        S = MultilevelApproximant(n0, d, spec, tuple(deltas))
        sgs, novs = counts(n)
        rec = BenchRecord(level=n, sgs=sgs, novs=novs)
        if axes is not None:
            dv = delta.evaluate_grid(axes)
            grid_vals = dv if grid_vals is None else grid_vals + dv
            if exact_vals is not None:
                rep = error_metrics(grid_vals, exact_vals)
                rec.max_error, rec.rms_error = rep.max_error, rep.rms_error
        rec.seconds = time.perf_counter() - start
        trace.append(rec)
        if trace_cb is not None:
            trace_cb(rec)
    return S, trace


def build_qmusik(
    u: Target,
    n0: int = 1,
    levels: int = 0,
    d: int = 2,
    spec: KernelSpec | None = None,
    eval_grid=None,
    *,
    exact=None,
    threads: int | None = None,
    memoize: bool = False,
    trace_cb: Callable | None = None,
):
    """Multilevel sparse quasi-interpolation of ``u``.

    Parameters
    ----------
    u : callable, NodeTable or array
        Target function on ``[0, 1]**d``.  Callables receive an ``(N, d)``
        array of points.
    n0 : int
        Sparse-grid level of the first approximation.
    levels : int
        Number of residual corrections; the final level is ``n0 + levels``.
    eval_grid : int or sequence of arrays, optional
        ``m`` for a uniform ``m**d`` lattice, or explicit axes.  When given,
        the trace carries max/RMS errors of each accumulated approximant.
    exact : callable or array, optional
        Reference values on ``eval_grid``; defaults to ``u`` itself.
    memoize : bool
        Evaluate the previous approximant once per distinct sparse-grid node
        instead of once per subgrid node.

    Returns
    -------
    (MultilevelApproximant, LevelTrace)
    """
    spec = spec or KernelSpec()

    def build_delta(n, S, j):
        if S is None:
            sampler = _residual_sampler(u, None, n, threads)
        elif memoize:
            sampler = _memoized_sampler(u, S, n, d, n)
        else:
            sampler = _residual_sampler(u, S, n, threads)
        return combine_terms(n, d, spec, sampler, threads)

    return _run_levels(
        u, n0, levels, d, spec, eval_grid, exact, build_delta,
        lambda n: (sparse_grid_size(n, d), nodes_visited(n, d)), trace_cb,
    )


def build_ml_full_grid(
    u: Target,
    n0: int = 1,
    levels: int = 0,
    d: int = 2,
    spec: KernelSpec | None = None,
    eval_grid=None,
    *,
    exact=None,
    threads: int | None = None,
    trace_cb: Callable | None = None,
):
    """Residual correction on isotropic full grids of levels ``n0, ..., n0 + levels``."""
    spec = spec or KernelSpec()

    def build_delta(n, S, j):
        l = full_grid_index(n, d)
        vals = _residual_sampler(u, S, n, threads)(l)
        return FullGridOperator(n, d, SubgridOperator(l, vals, spec))

    def counts(n):
        size = (2**n + 1) ** d
        return size, size

    return _run_levels(u, n0, levels, d, spec, eval_grid, exact, build_delta, counts, trace_cb)


def single_level_sweep(
    u: Target,
    n0: int,
    levels: int,
    d: int,
    spec: KernelSpec | None = None,
    eval_grid=None,
    *,
    full_grid: bool = False,
    exact=None,
    threads: int | None = None,
) -> LevelTrace:
    """Independent single-level approximations at levels ``n0 .. n0 + levels``.

    ``seconds`` is elapsed time since the start of the sweep.
    """
    from .quasi_ops import build_full_grid, build_qsik

    spec = spec or KernelSpec()
    axes = _resolve_axes(eval_grid, d)
    exact_vals = _exact_table(u, exact, axes)
    trace = LevelTrace()
    start = time.perf_counter()
    for n in range(n0, n0 + levels + 1):
        if full_grid:
            op = build_full_grid(u, n, d, spec)
            sgs = novs = (2**n + 1) ** d
        else:
            op = build_qsik(u, n, d, spec, threads)
            sgs, novs = sparse_grid_size(n, d), nodes_visited(n, d)
        rec = BenchRecord(level=n, sgs=sgs, novs=novs)
        if axes is not None:
            vals = op.evaluate_grid(axes, threads=threads)
            if exact_vals is not None:
                rep = error_metrics(vals, exact_vals)
                rec.max_error, rec.rms_error = rep.max_error, rep.rms_error
        rec.seconds = time.perf_counter() - start
        trace.append(rec)
    return trace
