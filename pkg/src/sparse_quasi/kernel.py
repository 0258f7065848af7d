"""Anisotropic Gaussian kernel and its exact integral over the unit interval.

The kernel attached to a subgrid with levels ``l`` factorises over directions,

    mu_l(x) = prod_p c * exp(-(a_p * x_p)**2),

where ``a_p`` grows like ``2**l_p`` so the kernel width tracks the mesh width
of each direction.  Two normalisations are supported (see :class:`KernelSpec`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import special

from .multiindex_grid import as_multiindex

Convention = Literal["density", "divisor"]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class KernelSpec:
    """Scale and normalisation of the Gaussian kernel.

    ``convention="density"`` (default)
        each factor is the normal density with standard deviation ``rho``
        measured in mesh widths: ``c = 1/(rho*sqrt(2*pi))``,
        ``a = 2**l / (rho*sqrt(2))``.  Kernel sums over a subgrid then
        approximate the identity, which is what makes the multilevel scheme
        converge.
    ``convention="divisor"``
        ``c = (2*pi)**-0.5`` and ``a = 2**l / rho``; with ``rho=1`` this is
        the plain ``(2 pi)^(-d/2) exp(-|A_l x|^2)`` kernel.

    ``truncation_threshold`` > 0 drops every node whose squared exponent
    ``sum_p (a_p x_p)**2`` exceeds the threshold; 0 means exact sums.
    """

    rho: float = 0.4
    truncation_threshold: float = 0.0
    convention: Convention = "density"

    def __post_init__(self):
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ValueError(f"rho must be positive and finite, got {self.rho}")
        if self.truncation_threshold < 0:
            raise ValueError("truncation_threshold must be >= 0")
        if self.convention not in ("density", "divisor"):
            raise ValueError(f"unknown kernel convention {self.convention!r}")

    @property
    def truncated(self) -> bool:
        return self.truncation_threshold > 0

    @property
    def amplitude(self) -> float:
        """Peak value ``c`` of one univariate factor."""
        if self.convention == "density":
            return 1.0 / (self.rho * _SQRT_2PI)
        return 1.0 / _SQRT_2PI

    def scale(self, level: int) -> float:
        """Per-direction scaling ``a`` for a direction refined to ``level``."""
        if self.convention == "density":
            return 2.0**level / (self.rho * math.sqrt(2.0))
        return 2.0**level / self.rho

    def peak(self, d: int) -> float:
        return self.amplitude**d


def anisotropy(l, spec: KernelSpec) -> np.ndarray:
    """Vector of per-direction scalings ``a_p`` for multi-index ``l``."""
    l = as_multiindex(l)
    return np.array([spec.scale(v) for v in l])


def eval_kernel(l, spec: KernelSpec, x):
    """Kernel value at displacement ``x`` (shape ``(d,)`` or ``(N, d)``)."""
    l = as_multiindex(l)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != l.d:
        raise ValueError(f"displacement has {x.shape[-1]} components, index has {l.d}")
    expo = np.sum((anisotropy(l, spec) * x) ** 2, axis=-1)
    val = spec.peak(l.d) * np.exp(-expo)
    if spec.truncated:
        val = np.where(expo > spec.truncation_threshold, 0.0, val)
    return float(val) if np.ndim(val) == 0 else val


def kernel_matrix(level: int, spec: KernelSpec, x, z) -> np.ndarray:
    """Univariate factor ``c*exp(-(a*(x_i - z_j))**2)`` as an ``(len(x), len(z))`` matrix."""
    a = spec.scale(level)
    t = a * (np.asarray(x, dtype=float)[:, None] - np.asarray(z, dtype=float)[None, :])
    return spec.amplitude * np.exp(-t * t)


def erf(x):
    """Error function; scalars go through :func:`math.erf`, arrays through scipy."""
    if np.ndim(x) == 0:
        return math.erf(float(x))
    return special.erf(np.asarray(x, dtype=float))


def univariate_weight(level: int, spec: KernelSpec, z):
    """Integral over ``[0, 1]`` of the univariate kernel factor centred at ``z``.

    Equals ``c*sqrt(pi)/(2a) * (erf(a(1-z)) + erf(a z))``.
    """
    a = spec.scale(level)
    pref = spec.amplitude * _SQRT_PI / (2.0 * a)
    if np.ndim(z) == 0:
        z = float(z)
        return pref * (math.erf(a * (1.0 - z)) + math.erf(a * z))
    z = np.asarray(z, dtype=float)
    return pref * (special.erf(a * (1.0 - z)) + special.erf(a * z))


def product_weight(l, spec: KernelSpec, z):
    """Integral over the unit cube of the kernel centred at ``z`` (shape ``(d,)`` or ``(N, d)``)."""
    l = as_multiindex(l)
    z = np.asarray(z, dtype=float)
    w = np.ones(z.shape[:-1])
    for p, level in enumerate(l):
        w = w * univariate_weight(level, spec, z[..., p])
    return float(w) if np.ndim(w) == 0 else w
