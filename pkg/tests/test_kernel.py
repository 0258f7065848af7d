import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from sparse_quasi.kernel import (
    KernelSpec,
    erf,
    eval_kernel,
    kernel_matrix,
    product_weight,
    univariate_weight,
)

DIVISOR_1 = KernelSpec(rho=1.0, convention="divisor")


def test_kernel_at_origin():
    for spec in (KernelSpec(rho=1.0, convention="divisor"), KernelSpec(rho=0.4, convention="divisor")):
        assert eval_kernel((3, 1), spec, [0.0, 0.0]) == pytest.approx(1 / (2 * math.pi), rel=1e-15)
    assert eval_kernel((3, 1), KernelSpec(rho=0.4), [0.0, 0.0]) == pytest.approx(
        1 / (2 * math.pi * 0.16), rel=1e-15
    )


def test_kernel_scalar_value():
    # (2 pi)^(-1/2) e^(-1), by hand: 0.3989422804014327 * 0.36787944117144233
    assert eval_kernel((1,), DIVISOR_1, [0.5]) == pytest.approx(0.14676266317373993, rel=1e-14)


def test_kernel_density_convention_value():
    # std 0.4 mesh widths: t = 2*0.1 = 0.2 -> exp(-0.2^2/(2*0.16)) / (0.4 sqrt(2 pi))
    expected = math.exp(-0.125) / (0.4 * math.sqrt(2 * math.pi))
    assert eval_kernel((1,), KernelSpec(), [0.1]) == pytest.approx(expected, rel=1e-14)


def test_kernel_even(rng):
    spec = KernelSpec(rho=0.7)
    x = rng.uniform(-1, 1, size=(50, 3))
    np.testing.assert_array_equal(eval_kernel((2, 1, 3), spec, x), eval_kernel((2, 1, 3), spec, -x))


def test_kernel_matrix_matches_pointwise(rng):
    spec = KernelSpec(rho=0.6, convention="divisor")
    x, z = rng.uniform(size=7), rng.uniform(size=5)
    m = kernel_matrix(3, spec, x, z)
    for i in range(7):
        for j in range(5):
            assert m[i, j] == pytest.approx(eval_kernel((3,), spec, [x[i] - z[j]]), rel=1e-15)


def test_truncation_cutoff_sides():
    spec = KernelSpec(rho=1.0, truncation_threshold=4.0, convention="divisor")
    assert eval_kernel((1,), spec, [0.9]) > 0  # exponent 3.24
    assert eval_kernel((1,), spec, [1.1]) == 0.0  # exponent 4.84


def test_truncation_soundness(rng):
    for conv in ("density", "divisor"):
        T = 9.0
        exact = KernelSpec(rho=0.5, convention=conv)
        trunc = KernelSpec(rho=0.5, truncation_threshold=T, convention=conv)
        x = rng.uniform(-0.5, 0.5, size=(400, 2))
        diff = abs(eval_kernel((2, 3), exact, x).sum() - eval_kernel((2, 3), trunc, x).sum())
        assert diff <= len(x) * exact.peak(2) * math.exp(-T)


def test_erf_basic():
    assert erf(0.0) == 0.0
    assert erf(1.0) == pytest.approx(0.8427007929497149, rel=1e-15)
    xs = np.linspace(-6, 6, 1000)
    np.testing.assert_array_equal(erf(-xs), -erf(xs))
    assert np.all(np.diff(erf(xs)) >= 0)


def test_erf_against_high_precision_series():
    mpmath.mp.dps = 35
    xs = np.concatenate([np.linspace(-5.5, 5.5, 301), [1e-8, 1e-3, -0.25, 2.75]])
    for x in xs:
        if x == 0:
            continue
        ref = float(mpmath.erf(mpmath.mpf(float(x))))
        assert abs(erf(float(x)) - ref) <= 1e-14 * abs(ref)
        assert abs(float(erf(np.array([x]))[0]) - ref) <= 1e-14 * abs(ref)


def _numeric_weight(level, spec, z):
    f = lambda x: float(eval_kernel((level,), spec, [x - z]))
    val, _ = integrate.quad(f, 0.0, 1.0, points=[z], epsabs=1e-15, epsrel=1e-13, limit=400)
    return val


@pytest.mark.parametrize("conv", ["density", "divisor"])
def test_weight_symmetric_center(conv):
    spec = KernelSpec(rho=0.4, convention=conv)
    a = spec.scale(2)
    expected = spec.amplitude * math.sqrt(math.pi) / a * math.erf(a / 2)
    assert univariate_weight(2, spec, 0.5) == pytest.approx(expected, rel=1e-15)
    if conv == "divisor":
        assert univariate_weight(2, spec, 0.5) == pytest.approx(math.erf(a / 2) / (a * math.sqrt(2)), rel=1e-15)


@pytest.mark.parametrize("conv", ["density", "divisor"])
def test_weight_against_adaptive_quadrature(conv):
    spec = KernelSpec(rho=0.4, convention=conv)
    assert abs(univariate_weight(1, spec, 0.0) - _numeric_weight(1, spec, 0.0)) <= 1e-12


def test_weight_limit():
    spec = KernelSpec(rho=1.0, convention="divisor")
    # a = 2^20 for level 20, rho = 1
    a = spec.scale(20)
    assert a * univariate_weight(20, spec, 0.3) == pytest.approx(1 / math.sqrt(2), rel=1e-14)
    # density kernels integrate to one mesh width
    assert univariate_weight(20, KernelSpec(), 0.3) == pytest.approx(2.0**-20, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    level=st.integers(1, 8),
    z=st.floats(0, 1),
    rho=st.floats(0.2, 1.0),
    conv=st.sampled_from(["density", "divisor"]),
)
def test_weight_kernel_consistency(level, z, rho, conv):
    spec = KernelSpec(rho=rho, convention=conv)
    w = univariate_weight(level, spec, z)
    assert w > 0
    assert abs(w - _numeric_weight(level, spec, z)) <= 1e-12


def test_weight_vectorized_matches_scalar(rng):
    spec = KernelSpec(rho=0.55)
    z = rng.uniform(size=20)
    vec = univariate_weight(4, spec, z)
    for zi, wi in zip(z, vec):
        assert wi == pytest.approx(univariate_weight(4, spec, float(zi)), rel=1e-15)


def test_product_weight_factorizes_and_is_symmetric():
    spec = KernelSpec(rho=0.4)
    w = product_weight((2, 3), spec, [0.25, 0.625])
    assert w == pytest.approx(univariate_weight(2, spec, 0.25) * univariate_weight(3, spec, 0.625), rel=1e-15)
    assert product_weight((3, 2), spec, [0.625, 0.25]) == pytest.approx(w, rel=1e-15)


def test_product_weight_against_cubature():
    spec = KernelSpec(rho=0.4)
    f = lambda x, y, z: float(eval_kernel((1, 1, 1), spec, [x - 0.5, y - 0.5, z - 0.5]))
    val, err = integrate.nquad(f, [[0, 1]] * 3, opts={"epsabs": 1e-13, "epsrel": 1e-13})
    assert abs(product_weight((1, 1, 1), spec, [0.5, 0.5, 0.5]) - val) <= 1e-10


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(rho=0.0)
    with pytest.raises(ValueError):
        KernelSpec(truncation_threshold=-1)
    with pytest.raises(ValueError):
        KernelSpec(convention="other")
