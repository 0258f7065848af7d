"""Multi-indices, anisotropic dyadic grids and combination-technique bookkeeping.

A subgrid with level vector ``l`` has nodes ``i_p * 2**-l_p`` with
``i_p = 0, ..., 2**l_p`` in every direction ``p``.  The sparse grid of level
``n`` in ``d`` dimensions is the union of all subgrids with ``|l|_1 = n + d - 1``.

Coordinates are kept as integer numerators over a power of two, so that
deduplication across subgrids is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb, prod
from typing import Iterator

import numpy as np

from .errors import EmptyIndexSetError

_INT64_MAX = 2**63 - 1


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Per-direction refinement levels, every component at least 1."""

    levels: tuple[int, ...]

    def __post_init__(self):
        levels = tuple(int(v) for v in self.levels)
        if not levels:
            raise ValueError("a multi-index needs at least one component")
        if any(v < 1 for v in levels):
            raise ValueError(f"multi-index components must be >= 1, got {levels}")
        object.__setattr__(self, "levels", levels)

    @property
    def d(self) -> int:
        return len(self.levels)

    @property
    def norm1(self) -> int:
        return sum(self.levels)

    def __iter__(self) -> Iterator[int]:
        return iter(self.levels)

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, p):
        return self.levels[p]

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.levels)) + ")"


def as_multiindex(l) -> MultiIndex:
    if isinstance(l, MultiIndex):
        return l
    return MultiIndex(tuple(l))


@dataclass(frozen=True)
class CombinationTerm:
    """One signed subgrid contribution of the combination formula."""

    index: MultiIndex
    coefficient: int


@dataclass(frozen=True)
class AnisotropicGrid:
    """Full tensor lattice of a single multi-index.

    Points are enumerated in lexicographic order of the integer index vector
    ``i``, i.e. the C-order ravel of an array of shape :attr:`shape`.
    """

    index: MultiIndex

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(2**l + 1 for l in self.index)

    @property
    def axes(self) -> list[np.ndarray]:
        """1-D node coordinates per direction (exact binary floats)."""
        return [np.arange(2**l + 1, dtype=float) / 2**l for l in self.index]

    def numerators(self, level: int | None = None) -> np.ndarray:
        """Integer coordinates over the common denominator ``2**level``.

        Returns an ``(N, d)`` int64 array in lexicographic point order.
        """
        top = max(self.index.levels) if level is None else level
        if top < max(self.index.levels):
            raise ValueError("common denominator level is coarser than the grid")
        axes = [np.arange(2**l + 1, dtype=np.int64) << (top - l) for l in self.index]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @property
    def points(self) -> np.ndarray:
        """``(N, d)`` float coordinates in lexicographic order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def __len__(self) -> int:
        return point_count(self.index)


@dataclass(frozen=True)
class SparseGridLevel:
    """Deduplicated node set of the level-``n`` sparse grid.

    ``numerators`` holds integer coordinates over ``2**n``; rows are sorted
    lexicographically, which coincides with lexicographic order of the
    reduced dyadic fractions.
    """

    n: int
    d: int
    numerators: np.ndarray

    @property
    def denominator_level(self) -> int:
        return self.n

    @property
    def points(self) -> np.ndarray:
        return self.numerators / float(2**self.n)

    def __len__(self) -> int:
        return len(self.numerators)

    @cached_property
    def _keys(self) -> frozenset:
        return frozenset(map(tuple, self.numerators.tolist()))

    def contains(self, other: "SparseGridLevel") -> bool:
        """True when every point of ``other`` is also a point of ``self``."""
        if other.d != self.d:
            return False
        shift = self.n - other.n
        if shift < 0:
            # a finer grid can only be contained if all its points are coarse
            if np.any(other.numerators % (1 << -shift)):
                return False
            rows = other.numerators >> -shift
        else:
            rows = other.numerators << shift
        return all(tuple(r) in self._keys for r in rows.tolist())


def enumerate_level_indices(total: int, d: int) -> list[MultiIndex]:
    """All multi-indices in ``d`` dimensions with components ``>= 1`` summing to ``total``.

    Output is in lexicographic order; its length is ``comb(total - 1, d - 1)``.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if total < d:
        raise EmptyIndexSetError(f"no multi-index in {d} dimensions sums to {total}")

    out: list[MultiIndex] = []

    def rec(prefix: tuple[int, ...], remaining: int, slots: int):
        if slots == 1:
            out.append(MultiIndex(prefix + (remaining,)))
            return
        for first in range(1, remaining - slots + 2):
            rec(prefix + (first,), remaining - first, slots - 1)

    rec((), total, d)
    return out


def grid_points(l) -> AnisotropicGrid:
    return AnisotropicGrid(as_multiindex(l))


def point_count(l) -> int:
    """Number of nodes ``prod(2**l_p + 1)`` of the subgrid, without building it."""
    l = as_multiindex(l)
    count = prod(2**v + 1 for v in l)
    if count > _INT64_MAX:
        raise OverflowError(f"point count of {l} exceeds the 64-bit integer range")
    return count


def combination_terms(n: int, d: int) -> list[CombinationTerm]:
    """Signed subgrids of the combination formula at level ``n``.

    For ``q = 0, ..., d-1`` every ``l`` with ``|l|_1 = n + d - 1 - q`` gets the
    coefficient ``(-1)**q * comb(d - 1, q)``.  Values of ``q`` whose index set
    is empty are skipped.
    """
    _check_level(n, d)
    terms = []
    for q in range(d):
        total = n + d - 1 - q
        if total < d:
            break
        coeff = (-1) ** q * comb(d - 1, q)
        terms.extend(CombinationTerm(l, coeff) for l in enumerate_level_indices(total, d))
    return terms


def sparse_grid(n: int, d: int) -> SparseGridLevel:
    _check_level(n, d)
    rows = [
        grid_points(l).numerators(n)
        for l in enumerate_level_indices(n + d - 1, d)
    ]
    # np.unique on rows sorts lexicographically
    uniq = np.unique(np.concatenate(rows, axis=0), axis=0)
    return SparseGridLevel(n=n, d=d, numerators=uniq)


def sparse_grid_size(n: int, d: int) -> int:
    """Number of distinct sparse-grid nodes, counted without building the grid.

    A 1-D coordinate has hierarchical level 1 if it is 0, 1/2 or 1 (3 values)
    and level ``k >= 2`` if it is an odd multiple of ``2**-k``
    (``2**(k-1)`` values).  A point lies in the level-``n`` sparse grid iff
    its hierarchical levels sum to at most ``n + d - 1``.
    """
    _check_level(n, d)
    budget = n + d - 1
    per_level = [0, 3] + [2 ** (k - 1) for k in range(2, budget + 1)]
    # ways[s] = number of points in the first p directions with level sum s
    ways = [1] + [0] * budget
    for _ in range(d):
        nxt = [0] * (budget + 1)
        for s, w in enumerate(ways):
            if w:
                for k in range(1, budget - s + 1):
                    nxt[s + k] += w * per_level[k]
        ways = nxt
    return sum(ways)


def nodes_visited(n: int, d: int) -> int:
    """Total node count over all combination terms, overlaps counted."""
    return sum(point_count(t.index) for t in combination_terms(n, d))


def grid_table(n_max: int, d: int) -> list[tuple[int, int, int]]:
    """``(level, sgs, novs)`` rows for levels ``1..n_max``."""
    return [(n, sparse_grid_size(n, d), nodes_visited(n, d)) for n in range(1, n_max + 1)]


def _check_level(n: int, d: int):
    if n < 1:
        raise ValueError(f"sparse grid level must be >= 1, got {n}")
    if d < 2:
        raise ValueError(f"sparse grids need d >= 2, got {d}")


def full_grid_index(n: int, d: int) -> MultiIndex:
    return MultiIndex((n,) * d)
