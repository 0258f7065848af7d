"""Test-function corpus, reference integrals and benchmark sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
import subprocess
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DimensionError, OracleFailure, RegistryError
from .kernel import KernelSpec
from .metrics import ErrorReport, error_metrics  # noqa: F401  (re-exported)
from .multilevel import (
    BenchRecord,
    build_ml_full_grid,
    build_qmusik,
    format_number,
    single_level_sweep,
)
from .multiindex_grid import nodes_visited, sparse_grid_size
from .quadrature import (
    integrate,
    ml_full_grid_quadrature,
    qmusik_quadrature,
    qsik_quadrature,
)
from .quasi_ops import build_full_grid

Factor = tuple[Callable[[np.ndarray], np.ndarray], tuple[float, ...]]


@dataclass(frozen=True)
class TestFunction:
    """A named integrand on ``[0, 1]**dimension``.

    ``factors`` lists one ``(g, breakpoints)`` pair per direction when the
    function is ``scale * prod_p g_p(x_p)``; breakpoints mark kinks that the
    1-D oracle must not straddle.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    dimension: int
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    exact_integral: float | None = None
    provenance: str = ""
    factors: tuple[Factor, ...] | None = field(default=None, repr=False)
    scale: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise DimensionError(
                f"{self.name} takes {self.dimension} coordinates, got {x.shape[-1]}"
            )
        return self.evaluator(x)

    @property
    def is_tensor_product(self) -> bool:
        return self.factors is not None


def _p2d(x):
    return (1.25 + np.cos(5.4 * x[..., 1])) / (6.0 + 6.0 * (3.0 * x[..., 0] - 1.0) ** 2)


def _g3d(x):
    return 18.0 / np.pi * np.exp(-(x[..., 0] ** 2 + 81.0 * x[..., 1] ** 2 + x[..., 2] ** 2))


def _h4d(x):
    return np.sin(np.prod(x[..., :4] ** 2, axis=-1))


def _m3d(x):
    return np.sin(x[..., 0] * x[..., 1] * x[..., 2])


def _franke4(x1, x2, x3, x4):
    e = np.exp
    return (
        0.75 * e(-(9 * x1 - 2) ** 2 - (9 * x2 - 2) ** 2 - (9 * x3 - 2) ** 2 / 4 - (9 * x4 - 2) ** 2 / 8)
        + 0.75 * e(-(9 * x1 + 1) ** 2 / 49 - (9 * x2 + 1) ** 2 / 10 - (9 * x3 + 1) ** 2 / 29 - (9 * x4 + 1) ** 2 / 39)
        + 0.5 * e(-(9 * x1 - 7) ** 2 / 4 - (9 * x2 - 3) ** 2 - (9 * x3 - 5) ** 2 / 2 - (9 * x4 - 5) ** 2 / 4)
        - 0.2 * e(-(9 * x1 - 4) ** 2 / 4 - (9 * x2 - 7) ** 2 - (9 * x3 - 5) ** 2 - (9 * x4 - 5) ** 2)
    )


def _f4d(x):
    # as written: the fourth slot of every exponential repeats x_1
    return _franke4(x[..., 0], x[..., 1], x[..., 2], x[..., 0])


def _f4d_x4(x):
    return _franke4(x[..., 0], x[..., 1], x[..., 2], x[..., 3])


def _t5d(x):
    return np.prod(np.maximum(x[..., :3] - 0.5, 0.0), axis=-1)


def _k10d(x):
    return np.exp(-np.sum(x * (1.0 - x), axis=-1))


def _one(t):
    return np.ones_like(t)


_HALF_RAMP: Factor = (lambda t: np.maximum(t - 0.5, 0.0), (0.5,))

_CORPUS = (
    TestFunction(
        "P2d", 2, _p2d,
        factors=((lambda t: 1.0 / (6.0 + 6.0 * (3.0 * t - 1.0) ** 2), ()), (lambda t: 1.25 + np.cos(5.4 * t), ())),
    ),
    TestFunction(
        "G3d", 3, _g3d, scale=18.0 / math.pi,
        factors=((lambda t: np.exp(-t * t), ()), (lambda t: np.exp(-81.0 * t * t), ()), (lambda t: np.exp(-t * t), ())),
    ),
    TestFunction("H4d", 4, _h4d),
    TestFunction("M3d", 3, _m3d, exact_integral=0.122434028745371, provenance="reference constant"),
    TestFunction(
        "F4d", 4, _f4d, exact_integral=0.07766696,
        provenance="reference constant; formula implemented as written, value not reproduced",
    ),
    TestFunction(
        "T5d", 5, _t5d, exact_integral=0.001953125,
        provenance="1/512 exactly; product over the first three coordinates",
        factors=(_HALF_RAMP, _HALF_RAMP, _HALF_RAMP, (_one, ()), (_one, ())),
    ),
    TestFunction(
        "K10d", 10, _k10d, exact_integral=0.19427907, provenance="reference constant (8 digits)",
        factors=tuple((lambda t: np.exp(-t * (1.0 - t)), ()) for _ in range(10)),
    ),
)

_VARIANTS = (
    TestFunction("F4d_x4", 4, _f4d_x4, provenance="F4d with x_4 in the fourth slot"),
)

_REGISTRY = {f.name: f for f in _CORPUS + _VARIANTS}


def corpus() -> list[TestFunction]:
    """The seven benchmark functions."""
    return list(_CORPUS)


def get_function(name: str) -> TestFunction:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise RegistryError(f"unknown test function {name!r}; known: {sorted(_REGISTRY)}") from None


def constant_function(d: int, c: float = 1.0) -> TestFunction:
    return TestFunction(
        f"const{d}d", d, lambda x: np.full(x.shape[:-1], c), exact_integral=c,
        factors=tuple((_one, ()) for _ in range(d)), scale=c,
    )


# ---------------------------------------------------------------- oracles


def _composite_gauss(order: int, breaks: Sequence[float]):
    t, w = leggauss(order)
    edges = np.asarray(breaks, dtype=float)
    lo, hi = edges[:-1, None], edges[1:, None]
    x = (0.5 * (hi - lo) * t + 0.5 * (hi + lo)).ravel()
    wx = (0.5 * (hi - lo) * w).ravel()
    return x, wx


def _gauss_1d(g, breakpoints, abs_tol, max_order=1024):
    breaks = [0.0, *sorted(b for b in breakpoints if 0.0 < b < 1.0), 1.0]
    prev = None
    order = 8
    while order <= max_order:
        x, w = _composite_gauss(order, breaks)
        val = float(np.dot(w, g(x)))
        if prev is not None and abs(val - prev) <= abs_tol:
            return val, abs(val - prev)
        prev = val
        order *= 2
    raise OracleFailure(f"1-D Gauss-Legendre did not reach {abs_tol:g} with {max_order} nodes")


def tensor_cubature(grid_fn, d, abs_tol, *, pieces=1, start_order=8, max_nodes=40_000_000):
    """Refine a tensor Gauss-Legendre rule until successive estimates agree.

    ``grid_fn(axes)`` must return the integrand on the tensor grid spanned by
    the list of 1-D ``axes``.  Each refinement doubles the order per piece
    (up to 32) and then the number of pieces.  Returns ``(value, error)``.
    """
    prev = None
    order = start_order
    while True:
        per_axis = order * pieces
        if per_axis**d > max_nodes:
            raise OracleFailure(
                f"cubature did not reach {abs_tol:g} within {max_nodes} nodes (last estimate {prev})"
            )
        x, w = _composite_gauss(order, np.linspace(0.0, 1.0, pieces + 1))
        vals = grid_fn([x] * d)
        acc = vals
        for _ in range(d):
            acc = np.tensordot(w, acc, axes=(0, 0))
        val = float(acc)
        if prev is not None and abs(val - prev) <= abs_tol:
            return val, abs(val - prev)
        prev = val
        if order < 32:
            order *= 2
        else:
            pieces *= 2


def _pointwise_grid_fn(f, d, chunk=2_000_000):
    def grid_fn(axes):
        shape = tuple(len(a) for a in axes)
        out = np.empty(shape)
        lead = axes[0]
        rest = np.meshgrid(*axes[1:], indexing="ij") if d > 1 else []
        rest_flat = [r.ravel() for r in rest]
        per = max(1, chunk // max(1, int(np.prod(shape[1:]))))
        for s in range(0, len(lead), per):
            x0 = lead[s : s + per]
            cols = [np.repeat(x0, len(rest_flat[0]) if rest_flat else 1)]
            cols += [np.tile(r, len(x0)) for r in rest_flat]
            pts = np.stack(cols, axis=1)
            out[s : s + per] = np.asarray(f(pts)).reshape((len(x0),) + shape[1:])
        return out

    return grid_fn


@dataclass(frozen=True)
class OracleEstimate:
    value: float
    error: float
    method: str


def oracle_estimate(f: TestFunction, abs_tol: float = 1e-12, max_nodes: int = 40_000_000) -> OracleEstimate:
    """Reference integral of ``f`` over the unit cube with an error estimate."""
    if not abs_tol > 0:
        raise ValueError("abs_tol must be positive")
    if f.factors is not None:
        d = f.dimension
        vals, errs = [], []
        # split the budget so the propagated product error stays below abs_tol
        tol = abs_tol / (2.0 * d * max(1.0, abs(f.scale)))
        for g, breaks in f.factors:
            v, e = _gauss_1d(g, breaks, tol)
            vals.append(v)
            errs.append(e)
        value = f.scale * math.prod(vals)
        err = abs(f.scale) * sum(
            e * math.prod(abs(v) for q, v in enumerate(vals) if q != p) for p, e in enumerate(errs)
        )
        return OracleEstimate(value, err, "tensor Gauss-Legendre")
    value, err = tensor_cubature(_pointwise_grid_fn(f, f.dimension), f.dimension, abs_tol, max_nodes=max_nodes)
    return OracleEstimate(value, err, "refined tensor Gauss-Legendre cubature")


def oracle_integral(f: TestFunction, abs_tol: float = 1e-12) -> float:
    return oracle_estimate(f, abs_tol).value


def reference_integral(f: TestFunction, abs_tol: float = 1e-12) -> float:
    """Reference constant where one exists, the oracle otherwise."""
    if f.exact_integral is not None:
        return f.exact_integral
    return oracle_integral(f, abs_tol)


# ------------------------------------------------------------- benchmarks

INTERP_METHODS = ("quasi", "ml_quasi", "qsik", "qmusik")
QUAD_METHODS = ("qsik_quad", "qmusik_quad", "quasi_quad", "ml_quasi_quad")
METHODS = INTERP_METHODS + QUAD_METHODS

DEFAULT_EVAL_GRID = {2: 160, 3: 50, 4: 21}

BENCH_COLUMNS = (
    "method", "function", "level", "sgs_or_n", "novs",
    "max_error", "rms_error", "abs_error", "seconds",
)


@dataclass
class BenchParams:
    """Sweep settings.

    ``levels`` counts grid levels in the sweep: records cover
    ``n0 .. n0 + max(levels, 1) - 1``.
    """

    n0: int = 1
    levels: int = 1
    spec: KernelSpec = field(default_factory=KernelSpec)
    eval_grid: int | None = None
    threads: int = 1
    reference: float | None = None

    def corrections(self) -> int:
        return max(self.levels, 1) - 1


@dataclass
class BenchRow:
    method: str
    function: str
    record: BenchRecord

    def as_dict(self) -> dict:
        r = self.record
        return {
            "method": self.method,
            "function": self.function,
            "level": r.level,
            "sgs_or_n": r.sgs,
            "novs": r.novs,
            "max_error": r.max_error,
            "rms_error": r.rms_error,
            "abs_error": r.abs_error,
            "seconds": r.seconds,
        }


def default_eval_grid(d: int) -> int:
    return DEFAULT_EVAL_GRID.get(d, 11)


def run_benchmark(method: str, f: TestFunction, params: BenchParams) -> list[BenchRow]:
    """Per-level records for one method on one test function."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if params.n0 < 1 or params.levels < 0:
        raise ValueError("need n0 >= 1 and levels >= 0")
    d = f.dimension
    spec = params.spec
    extra = params.corrections()
    if method in INTERP_METHODS:
        m = params.eval_grid or default_eval_grid(d)
        if method == "qmusik":
            _, trace = build_qmusik(f, params.n0, extra, d, spec, m, threads=params.threads)
        elif method == "ml_quasi":
            _, trace = build_ml_full_grid(f, params.n0, extra, d, spec, m, threads=params.threads)
        else:
            trace = single_level_sweep(
                f, params.n0, extra, d, spec, m, full_grid=(method == "quasi"), threads=params.threads
            )
        return [BenchRow(method, f.name, rec) for rec in trace]

    exact = params.reference if params.reference is not None else reference_integral(f)
    if method == "qmusik_quad":
        _, trace = qmusik_quadrature(f, params.n0, extra, d, spec, exact=exact, threads=params.threads)
    elif method == "ml_quasi_quad":
        _, trace = ml_full_grid_quadrature(f, params.n0, extra, d, spec, exact=exact, threads=params.threads)
    else:
        trace = _single_level_quadrature(method, f, params, exact)
    return [BenchRow(method, f.name, rec) for rec in trace]


def _single_level_quadrature(method, f, params, exact):
    import time

    d = f.dimension
    start = time.perf_counter()
    trace = []
    for n in range(params.n0, params.n0 + params.corrections() + 1):
        if method == "qsik_quad":
            value = qsik_quadrature(f, n, d, params.spec, params.threads).value
            sgs, novs = sparse_grid_size(n, d), nodes_visited(n, d)
        else:
            value = integrate(build_full_grid(f, n, d, params.spec))
            sgs = novs = (2**n + 1) ** d
        trace.append(BenchRecord(
            level=n, sgs=sgs, novs=novs, value=value, abs_error=abs(value - exact),
            seconds=time.perf_counter() - start,
        ))
    return trace


def benchmark_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for row in rows:
        rec = row.as_dict()
        w.writerow([rec[c] if c in ("method", "function") else format_number(rec[c]) for c in BENCH_COLUMNS])
    return buf.getvalue()


def git_hash() -> str | None:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5, check=True
        )
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None


def run_metadata(params: BenchParams, d: int, method: str) -> dict:
    meta = {
        "rho": params.spec.rho,
        "kernel_convention": params.spec.convention,
        "truncation_threshold": params.spec.truncation_threshold,
        "n0": params.n0,
        "levels": params.levels,
        "threads": params.threads,
        "git_hash": git_hash(),
    }
    if method in INTERP_METHODS:
        m = params.eval_grid or default_eval_grid(d)
        meta["eval_grid"] = {"m": m, "d": d, "points": "endpoints included, spacing 1/(m-1)"}
    return meta


def benchmark_json(rows: Sequence[BenchRow], metadata: dict) -> str:
    return json.dumps({"metadata": metadata, "records": [r.as_dict() for r in rows]}, indent=2)
