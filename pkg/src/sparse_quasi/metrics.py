from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class ErrorReport:
    max_error: float
    rms_error: float
    grid_spec: tuple[int, ...] | None = None


def error_metrics(approx, exact, grid_spec=None) -> ErrorReport:
    """Maximum and root-mean-square pointwise difference of two value tables."""
    approx = np.asarray(approx, dtype=float).ravel()
    exact = np.asarray(exact, dtype=float).ravel()
    if approx.size != exact.size:
        raise DimensionError(f"table lengths differ: {approx.size} vs {exact.size}")
    if approx.size == 0:
        raise DimensionError("empty value tables")
    diff = np.abs(approx - exact)
    mx = float(diff.max())
    rms = float(np.sqrt(np.mean(diff * diff)))
    # rounding in the mean can push rms a few ulps above max for constant diffs
    rms = min(rms, mx)
    if grid_spec is not None:
        grid_spec = tuple(int(m) for m in np.atleast_1d(grid_spec))
    return ErrorReport(mx, rms, grid_spec)
