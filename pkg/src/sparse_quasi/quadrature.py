"""Exact integration of quasi-interpolants over the unit cube.

Every subgrid quasi-interpolant integrates to ``sum_z u(z) w_l(z)`` where the
node weight ``w_l(z)`` is a product of closed-form univariate erf integrals.
Combining subgrids with the usual coefficients gives the sparse rule, and the
integral of a multilevel approximant is the sum of its deltas' integrals.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._parallel import ordered_map, ordered_sum
from .kernel import KernelSpec, univariate_weight
from .multiindex_grid import (
    CombinationTerm,
    as_multiindex,
    combination_terms,
    grid_points,
    nodes_visited,
)
from .quasi_ops import CombinedOperator, FullGridOperator, SubgridOperator, Target, sample


@lru_cache(maxsize=4096)
def _weights_1d(level: int, rho: float, convention: str) -> np.ndarray:
    spec = KernelSpec(rho=rho, convention=convention)
    z = np.arange(2**level + 1, dtype=float) / 2**level
    w = univariate_weight(level, spec, z)
    w.setflags(write=False)
    return w


def axis_weights(l, spec: KernelSpec) -> list[np.ndarray]:
    """Per-direction weight vectors whose outer product is the subgrid weight table."""
    return [_weights_1d(v, spec.rho, spec.convention) for v in as_multiindex(l)]


def weight_table(l, spec: KernelSpec) -> np.ndarray:
    ws = axis_weights(l, spec)
    table = ws[0]
    for w in ws[1:]:
        table = np.multiply.outer(table, w)
    return table


def integrate_values(values: np.ndarray, l, spec: KernelSpec) -> float:
    """``sum_z values[z] * w_l(z)``, contracted one direction at a time."""
    acc = values
    for w in axis_weights(l, spec):
        acc = np.tensordot(w, acc, axes=(0, 0))
    return float(acc)


def integrate(op, threads: int | None = None) -> float:
    """Exact integral over ``[0, 1]**d`` of any operator built by this package."""
    if isinstance(op, SubgridOperator):
        return integrate_values(op.values, op.index, op.spec)
    if isinstance(op, FullGridOperator):
        return integrate(op.subgrid)
    if isinstance(op, CombinedOperator):
        parts = ordered_map(lambda t: t[0].coefficient * integrate(t[1]), op.terms, threads)
        return float(ordered_sum(parts))
    deltas = getattr(op, "deltas", None)
    if deltas is not None:
        return float(ordered_sum(integrate(delta, threads) for delta in deltas))
    raise TypeError(f"cannot integrate {type(op).__name__}")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    nodes_used: int
    wall_time: float


@dataclass(frozen=True)
class QuadratureRule:
    """Signed combination of positive subgrid weight tables."""

    n: int
    d: int
    spec: KernelSpec
    terms: tuple[tuple[CombinationTerm, np.ndarray], ...] = field(repr=False)

    def apply(self, u: Target) -> float:
        return float(ordered_sum(
            t.coefficient * float(np.sum(sample(u, t.index) * w)) for t, w in self.terms
        ))

    def materialize(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct nodes with their signed effective weights.

        Nodes are sorted lexicographically, matching ``sparse_grid(n, d)``.
        """
        keys = []
        weights = []
        for t, w in self.terms:
            keys.append(grid_points(t.index).numerators(self.n))
            weights.append(t.coefficient * w.ravel())
        keys = np.concatenate(keys, axis=0)
        weights = np.concatenate(weights)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        eff = np.zeros(len(uniq))
        np.add.at(eff, inverse.ravel(), weights)
        return uniq / float(2**self.n), eff


def subgrid_quadrature(u: Target, l, spec: KernelSpec) -> float:
    l = as_multiindex(l)
    return integrate_values(sample(u, l), l, spec)


def qsik_quadrature(u: Target, n: int, d: int, spec: KernelSpec, threads: int | None = None) -> QuadratureResult:
    start = time.perf_counter()
    terms = combination_terms(n, d)
    parts = ordered_map(lambda t: t.coefficient * subgrid_quadrature(u, t.index, spec), terms, threads)
    value = float(ordered_sum(parts))
    return QuadratureResult(value, nodes_visited(n, d), time.perf_counter() - start)


def qmusik_quadrature(
    u: Target,
    n0: int = 1,
    levels: int = 0,
    d: int = 2,
    spec: KernelSpec | None = None,
    *,
    exact: float | None = None,
    threads: int | None = None,
):
    """Integral of the multilevel approximant, level by level.

    Returns the final :class:`QuadratureResult` and a trace of
    :class:`~sparse_quasi.multilevel.BenchRecord` whose ``value`` is the
    running integral (and ``abs_error`` its distance to ``exact``).
    """
    from .multilevel import build_qmusik

    spec = spec or KernelSpec()
    return _multilevel_quadrature(
        lambda cb: build_qmusik(u, n0, levels, d, spec, threads=threads, trace_cb=cb),
        exact, threads,
    )


def ml_full_grid_quadrature(u: Target, n0=1, levels=0, d=2, spec=None, *, exact=None, threads=None):
    from .multilevel import build_ml_full_grid

    spec = spec or KernelSpec()
    return _multilevel_quadrature(
        lambda cb: build_ml_full_grid(u, n0, levels, d, spec, threads=threads, trace_cb=cb),
        exact, threads,
    )


def _multilevel_quadrature(run, exact, threads):
    start = time.perf_counter()
    S, trace = run(None)
    total = 0.0
    nodes = 0
    integrating = 0.0
    for delta, rec in zip(S.deltas, trace):
        t0 = time.perf_counter()
        total += integrate(delta, threads)
        integrating += time.perf_counter() - t0
        nodes += rec.novs
        rec.value = total
        rec.seconds += integrating
        if exact is not None:
            rec.abs_error = abs(total - exact)
    elapsed = time.perf_counter() - start
    return QuadratureResult(total, nodes, elapsed), trace


def export_rule(n: int, d: int, spec: KernelSpec) -> QuadratureRule:
    terms = tuple((t, weight_table(t.index, spec)) for t in combination_terms(n, d))
    return QuadratureRule(n, d, spec, terms)
