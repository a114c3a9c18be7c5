import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from labnet import kernels as K
from labnet.errors import DomainError, InvalidArgument
from labnet.kernels import Family, KernelSpec

SPLINES = [KernelSpec.spline(k) for k in range(1, 8)]
ALL = [KernelSpec.gaussian(), KernelSpec.multiquadric()] + SPLINES
RADII = (0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0)


def test_spec_validation():
    with pytest.raises(InvalidArgument):
        KernelSpec(Family.SPLINE, 0)
    with pytest.raises(InvalidArgument):
        KernelSpec(Family.GAUSSIAN, 3)
    assert KernelSpec.parse("spline", 5) == KernelSpec.spline(5)
    assert KernelSpec.parse("gaussian").name == "gaussian"
    with pytest.raises(InvalidArgument):
        KernelSpec.parse("cubic")


def test_values():
    assert K.eval(KernelSpec.spline(3), 0.0) == 0.0
    assert K.eval(KernelSpec.spline(3), 2.0) == 8.0
    assert K.eval(KernelSpec.spline(2), 1.0) == 0.0
    assert K.eval(KernelSpec.gaussian(), 0.0) == 1.0
    assert K.eval(KernelSpec.multiquadric(), 0.0) == 1.0
    assert K.eval(KernelSpec.spline(2), 3.0) == pytest.approx(9 * math.log(3))
    assert K.eval(KernelSpec.gaussian(), 1.5) == pytest.approx(math.exp(-2.25))
    assert K.eval(KernelSpec.multiquadric(), 2.0) == pytest.approx(math.sqrt(5))


def test_derivative_values():
    assert K.eval_deriv(KernelSpec.spline(3), 2.0) == 12.0
    assert K.eval_deriv(KernelSpec.gaussian(), 0.0) == 0.0
    assert K.eval_deriv(KernelSpec.multiquadric(), 0.0) == 0.0
    for k in (2, 4, 6):
        assert K.eval_deriv(KernelSpec.spline(k), 0.0) == 0.0
    assert K.eval_deriv(KernelSpec.spline(1), 0.0) == 1.0
    assert K.eval_deriv(KernelSpec.gaussian(), 1.0) == pytest.approx(-2 * math.exp(-1))
    assert K.eval_deriv(KernelSpec.multiquadric(), 1.0) == pytest.approx(1 / math.sqrt(2))


@pytest.mark.parametrize("spec", ALL, ids=lambda s: s.name)
def test_derivative_vs_central_differences(spec):
    for r in RADII + (0.7,):
        h = 1e-6 * max(1.0, r)
        fd = (K.eval(spec, r + h) - K.eval(spec, r - h)) / (2 * h)
        d = K.eval_deriv(spec, r)
        assert abs(d - fd) <= 1e-6 * max(abs(d), abs(fd), 1e-12), (spec.name, r, d, fd)


def test_spline_zero_exactly():
    for spec in SPLINES:
        assert K.eval(spec, 0.0) == 0.0
        assert K.phi(spec, np.zeros(3)).tolist() == [0.0, 0.0, 0.0]
        assert K.dphi(spec, np.zeros(2)).tolist() == [0.0, 0.0] or spec.degree == 1


@pytest.mark.parametrize("bad", [-1e-9, -1.0, math.inf, math.nan])
def test_domain(bad):
    for spec in ALL:
        with pytest.raises(DomainError):
            K.eval(spec, bad)
        with pytest.raises(DomainError):
            K.eval_deriv(spec, bad)


@given(st.floats(0, 50, allow_nan=False))
def test_ranges(r):
    g = K.eval(KernelSpec.gaussian(), r)
    assert 0.0 <= g <= 1.0
    assert K.eval(KernelSpec.multiquadric(), r) >= 1.0


@given(st.floats(0, 20), st.floats(0, 20), st.sampled_from([1, 3, 5, 7]))
def test_odd_spline_monotone(a, b, k):
    lo, hi = sorted((a, b))
    spec = KernelSpec.spline(k)
    assert K.eval(spec, lo) <= K.eval(spec, hi)


@pytest.mark.parametrize("spec", ALL, ids=lambda s: s.name)
def test_vectorised_matches_scalar(spec):
    r = np.array([0.0, 0.01, 0.3, 1.0, 2.5, 7.0])
    np.testing.assert_allclose(K.phi(spec, r), [K.eval(spec, v) for v in r], rtol=1e-14)
    np.testing.assert_allclose(K.dphi(spec, r), [K.eval_deriv(spec, v) for v in r], rtol=1e-14)
