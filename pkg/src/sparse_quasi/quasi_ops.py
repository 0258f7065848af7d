"""Subgrid quasi-interpolants and their combination on sparse grids.

A subgrid operator stores the samples ``u(z)`` on one anisotropic grid and
evaluates ``sum_z u(z) * mu_l(x - z)``.  No linear system is ever solved.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from ._parallel import ordered_map, ordered_sum
from .errors import DataError, DimensionError
from .kernel import KernelSpec, anisotropy, kernel_matrix
from .multiindex_grid import (
    CombinationTerm,
    MultiIndex,
    as_multiindex,
    combination_terms,
    full_grid_index,
    grid_points,
    point_count,
)

# cap on the number of float64 temporaries per chunk of evaluation points
_CHUNK_ELEMENTS = 4_000_000


class NodeTable:
    """Tabulated node values keyed by multi-index.

    Each entry is an array of shape ``grid_points(l).shape``.
    """

    def __init__(self, tables: dict | None = None):
        self._tables: dict[MultiIndex, np.ndarray] = {}
        for l, vals in (tables or {}).items():
            self[l] = vals

    def __setitem__(self, l, values):
        l = as_multiindex(l)
        shape = grid_points(l).shape
        values = np.asarray(values, dtype=float)
        if values.size != point_count(l):
            raise DimensionError(
                f"table for {l} has {values.size} values, grid has {point_count(l)}"
            )
        self._tables[l] = values.reshape(shape)

    def __contains__(self, l) -> bool:
        return as_multiindex(l) in self._tables

    def __len__(self) -> int:
        return len(self._tables)

    def indices(self) -> list[MultiIndex]:
        return sorted(self._tables)

    def values_for(self, l) -> np.ndarray:
        l = as_multiindex(l)
        try:
            return self._tables[l]
        except KeyError:
            raise DataError(f"node table has no values for subgrid {l}") from None

    @classmethod
    def from_function(cls, u: Callable, indices: Sequence) -> "NodeTable":
        return cls({l: sample(u, l) for l in indices})


Target = Union[Callable, NodeTable, np.ndarray, Sequence[float]]


def read_node_table(path) -> NodeTable:
    """Read a CSV with header ``level_1..level_d,i_1..i_d,value``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "value" or (len(header) - 1) % 2:
            raise DimensionError(f"bad node table header: {header}")
        d = (len(header) - 1) // 2
        expected = [f"level_{p + 1}" for p in range(d)] + [f"i_{p + 1}" for p in range(d)]
        if header[:-1] != expected:
            raise DimensionError(f"bad node table header: {header}")
        raw: dict[tuple[int, ...], dict[tuple[int, ...], float]] = {}
        for row in reader:
            if not row:
                continue
            levels = tuple(int(v) for v in row[:d])
            idx = tuple(int(v) for v in row[d : 2 * d])
            raw.setdefault(levels, {})[idx] = float(row[-1])
    table = NodeTable()
    for levels, entries in raw.items():
        l = MultiIndex(levels)
        shape = grid_points(l).shape
        if len(entries) != point_count(l):
            raise DimensionError(
                f"node table for {l} has {len(entries)} rows, grid has {point_count(l)}"
            )
        vals = np.empty(shape)
        for idx, v in entries.items():
            if any(not 0 <= i < s for i, s in zip(idx, shape)):
                raise DimensionError(f"node index {idx} outside subgrid {l}")
            vals[idx] = v
        table[l] = vals
    return table


def write_node_table(path, table: NodeTable):
    indices = table.indices()
    if not indices:
        raise DimensionError("empty node table")
    d = indices[0].d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"level_{p + 1}" for p in range(d)] + [f"i_{p + 1}" for p in range(d)] + ["value"])
        for l in indices:
            vals = table.values_for(l)
            for idx in np.ndindex(vals.shape):
                w.writerow([*l.levels, *idx, repr(float(vals[idx]))])


def sample(u: Target, l, check: bool = True) -> np.ndarray:
    """Values of ``u`` on the nodes of subgrid ``l``, shaped like the grid."""
    l = as_multiindex(l)
    grid = grid_points(l)
    if isinstance(u, NodeTable):
        vals = u.values_for(l)
    elif callable(u):
        vals = np.asarray(u(grid.points), dtype=float)
        if vals.size != point_count(l):
            raise DimensionError(
                f"function returned {vals.size} values for {point_count(l)} nodes"
            )
        vals = vals.reshape(grid.shape)
    else:
        vals = np.asarray(u, dtype=float)
        if vals.size != point_count(l):
            raise DimensionError(
                f"value table has {vals.size} entries, subgrid {l} has {point_count(l)} nodes"
            )
        vals = vals.reshape(grid.shape)
    if check:
        check_finite(vals, l)
    return vals


def check_finite(vals: np.ndarray, l: MultiIndex, what: str = "sample", level: int | None = None):
    bad = np.argwhere(~np.isfinite(vals))
    if len(bad):
        idx = tuple(int(i) for i in bad[0])
        coords = tuple(i / 2**lv for i, lv in zip(idx, l))
        where = f" at level {level}" if level is not None else ""
        raise DataError(
            f"non-finite {what}{where} on subgrid {l}, node {idx} (x={coords}): {vals[idx]}"
        )


@dataclass(frozen=True)
class SubgridOperator:
    """Quasi-interpolant ``sum_z u(z) mu_l(x - z)`` on one anisotropic grid."""

    index: MultiIndex
    values: np.ndarray = field(repr=False)
    spec: KernelSpec

    def __post_init__(self):
        if self.values.shape != grid_points(self.index).shape:
            raise DimensionError(
                f"values of shape {self.values.shape} do not match subgrid {self.index}"
            )

    @property
    def d(self) -> int:
        return self.index.d

    @property
    def node_values(self) -> np.ndarray:
        """Node values in lexicographic point order."""
        return self.values.ravel()

    @property
    def nodes_used(self) -> int:
        return self.values.size

    def evaluate(self, x, threads: int | None = None) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.d:
            raise DimensionError(f"points have {pts.shape[1]} coordinates, operator has {self.d}")
        if self.spec.truncated:
            out = self._evaluate_truncated(pts)
        else:
            out = self._evaluate_exact(pts)
        return float(out[0]) if scalar else out

    def _evaluate_exact(self, pts: np.ndarray) -> np.ndarray:
        axes = grid_points(self.index).axes
        per_point = max(1, self.values.size // self.values.shape[0])
        chunk = max(1, _CHUNK_ELEMENTS // per_point)
        out = np.empty(len(pts))
        for s in range(0, len(pts), chunk):
            xs = pts[s : s + chunk]
            mats = [kernel_matrix(lv, self.spec, xs[:, p], axes[p]) for p, lv in enumerate(self.index)]
            acc = np.tensordot(mats[0], self.values, axes=(1, 0))
            for m in mats[1:]:
                # contract the leading grid axis for each point separately
                acc = np.einsum("ki,ki...->k...", m, acc)
            out[s : s + chunk] = acc
        return out

    def _evaluate_truncated(self, pts: np.ndarray) -> np.ndarray:
        axes = grid_points(self.index).axes
        a = anisotropy(self.index, self.spec)
        thresh = self.spec.truncation_threshold
        chunk = max(1, _CHUNK_ELEMENTS // self.values.size)
        out = np.empty(len(pts))
        d = self.d
        for s in range(0, len(pts), chunk):
            xs = pts[s : s + chunk]
            expo = np.zeros((len(xs),) + self.values.shape)
            for p in range(d):
                e = (a[p] * (xs[:, p, None] - axes[p][None, :])) ** 2
                shape = [len(xs)] + [1] * d
                shape[p + 1] = len(axes[p])
                expo += e.reshape(shape)
            k = np.where(expo > thresh, 0.0, np.exp(-expo))
            out[s : s + chunk] = self.spec.peak(d) * (k * self.values).reshape(len(xs), -1).sum(axis=1)
        return out

    def evaluate_grid(self, axes: Sequence[np.ndarray], threads: int | None = None) -> np.ndarray:
        """Values on the tensor grid spanned by ``axes``; shape ``tuple(len(a) for a in axes)``."""
        if len(axes) != self.d:
            raise DimensionError(f"{len(axes)} axes given for a {self.d}-dimensional operator")
        if self.spec.truncated:
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=1)
            return self._evaluate_truncated(pts).reshape(mesh[0].shape)
        nodes = grid_points(self.index).axes
        v = self.values
        for p, lv in enumerate(self.index):
            m = kernel_matrix(lv, self.spec, axes[p], nodes[p])
            v = np.moveaxis(np.tensordot(m, v, axes=(1, p)), 0, p)
        return v


@dataclass(frozen=True)
class CombinedOperator:
    """Signed sum of subgrid operators given by the combination formula."""

    n: int
    d: int
    spec: KernelSpec
    terms: tuple[tuple[CombinationTerm, SubgridOperator], ...] = field(repr=False)

    @property
    def nodes_used(self) -> int:
        return sum(op.nodes_used for _, op in self.terms)

    def evaluate(self, x, threads: int | None = None):
        parts = ordered_map(lambda t: t[0].coefficient * np.asarray(t[1].evaluate(x)), self.terms, threads)
        out = ordered_sum(parts)
        return float(out) if np.ndim(out) == 0 else out

    def evaluate_grid(self, axes, threads: int | None = None) -> np.ndarray:
        parts = ordered_map(lambda t: t[0].coefficient * t[1].evaluate_grid(axes), self.terms, threads)
        return ordered_sum(parts)


@dataclass(frozen=True)
class FullGridOperator:
    """Isotropic quasi-interpolant on the uniform grid with ``(2**n + 1)**d`` nodes."""

    n: int
    d: int
    subgrid: SubgridOperator = field(repr=False)

    @property
    def spec(self) -> KernelSpec:
        return self.subgrid.spec

    @property
    def node_values(self) -> np.ndarray:
        return self.subgrid.node_values

    @property
    def nodes_used(self) -> int:
        return self.subgrid.nodes_used

    def evaluate(self, x, threads: int | None = None):
        return self.subgrid.evaluate(x)

    def evaluate_grid(self, axes, threads: int | None = None) -> np.ndarray:
        return self.subgrid.evaluate_grid(axes)


def build_subgrid_operator(u: Target, l, spec: KernelSpec) -> SubgridOperator:
    l = as_multiindex(l)
    return SubgridOperator(l, sample(u, l), spec)


def eval_subgrid(op: SubgridOperator, x):
    return op.evaluate(x)


def combine_terms(n: int, d: int, spec: KernelSpec, values_for: Callable, threads: int | None = None) -> CombinedOperator:
    """Build a combined operator whose subgrid values come from ``values_for(index)``."""
    terms = combination_terms(n, d)
    ops = ordered_map(lambda t: SubgridOperator(t.index, values_for(t.index), spec), terms, threads)
    return CombinedOperator(n, d, spec, tuple(zip(terms, ops)))


def build_qsik(u: Target, n: int, d: int, spec: KernelSpec, threads: int | None = None) -> CombinedOperator:
    """Single-level sparse quasi-interpolant of ``u`` at level ``n``."""
    return combine_terms(n, d, spec, lambda l: sample(u, l), threads)


def eval_combined(op: CombinedOperator, x, threads: int | None = None):
    return op.evaluate(x, threads)


def build_full_grid(u: Target, n: int, d: int, spec: KernelSpec) -> FullGridOperator:
    if n < 1 or d < 1:
        raise ValueError("full grid needs n >= 1 and d >= 1")
    return FullGridOperator(n, d, build_subgrid_operator(u, full_grid_index(n, d), spec))


def eval_full_grid(op: FullGridOperator, x):
    return op.evaluate(x)


def uniform_axes(m: int, d: int) -> list[np.ndarray]:
    """Axes of the ``m**d`` evaluation lattice with both endpoints, spacing ``1/(m-1)``."""
    if m < 2:
        raise ValueError("evaluation grid needs m >= 2")
    ax = np.linspace(0.0, 1.0, m)
    return [ax] * d


def lattice_points(axes: Sequence[np.ndarray]) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def eval_on_grid(op, m: int, threads: int | None = None) -> np.ndarray:
    """Values of any operator on the uniform ``m**d`` lattice, shape ``(m,)*d``."""
    return op.evaluate_grid(uniform_axes(m, op.d), threads=threads)
