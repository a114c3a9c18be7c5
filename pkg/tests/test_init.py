import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from labnet import activation as lab
from labnet.errors import InvalidArgument, SingularMatrix
from labnet.init import ControlPointSet, InitStrategy, init_block, make_control_points, solve_init
from labnet.kernels import KernelSpec

KERNELS = [KernelSpec.spline(k) for k in (1, 2, 3, 4, 5)] + [KernelSpec.gaussian(), KernelSpec.multiquadric()]


def reference_solve(x, y, phi):
    """Assemble the augmented system independently and hand it to LAPACK."""
    s = len(x)
    m = np.zeros((s + 2, s + 2))
    for i in range(s):
        for j in range(s):
            m[i, j] = phi(abs(x[i] - x[j]))
        m[i, s], m[i, s + 1] = x[i], 1.0
        m[s, i], m[s + 1, i] = x[i], 1.0
    return np.linalg.solve(m, np.concatenate([y, [0.0, 0.0]]))


def test_control_points():
    hs = make_control_points("hockey-stick", 3, 2.0)
    assert hs.points == [(-2.0, 0.0), (0.0, 0.0), (2.0, 2.0)]
    assert make_control_points("linear", 3, 2.0).points == [(-2.0, -2.0), (0.0, 0.0), (2.0, 2.0)]
    ry = make_control_points("random-y", 5, 2.0, np.random.default_rng(7))
    assert ry.x.tolist() == [-2.0, -1.0, 0.0, 1.0, 2.0]
    assert np.all(np.abs(ry.y) <= 2.0)


def test_control_point_errors():
    with pytest.raises(InvalidArgument):
        make_control_points("hockey-stick", 1, 2.0)
    with pytest.raises(InvalidArgument):
        make_control_points("hockey-stick", 3, 0.0)
    with pytest.raises(InvalidArgument):
        make_control_points("random-y", 3, 2.0)
    with pytest.raises(InvalidArgument):
        ControlPointSet([0.0, 0.0, 1.0], [0, 0, 1], 2.0)
    with pytest.raises(InvalidArgument):
        ControlPointSet([-3.0, 0.0, 1.0], [0, 0, 1], 2.0)


def test_hockey_stick_spline3_constants():
    p = init_block("hockey-stick", 3, KernelSpec.spline(3), 2.0)
    ref = reference_solve([-2.0, 0.0, 2.0], np.array([0.0, 0.0, 2.0]), lambda r: r ** 3)
    np.testing.assert_allclose(p.lambdas, ref[:3], atol=1e-14)
    np.testing.assert_allclose([p.v0, p.v1], ref[3:], atol=1e-14)
    # worked by hand: f(x) = (|x+2|^3 - 2|x|^3 + |x-2|^3) / 32 + x/2 - 1/2
    np.testing.assert_allclose(p.lambdas, [1 / 32, -1 / 16, 1 / 32], atol=1e-14)
    assert p.v0 == pytest.approx(0.5, abs=1e-14)
    assert p.v1 == pytest.approx(-0.5, abs=1e-14)
    for x, y in [(-2, 0), (0, 0), (2, 2)]:
        assert abs(lab.forward_scalar(p, x) - y) <= 1e-6


def test_collinear_points_need_only_the_tail():
    pts = ControlPointSet([-2.0, 0.0, 2.0], [-2.0, 0.0, 2.0], 2.0, InitStrategy.RANDOM_Y)
    p = solve_init(pts, KernelSpec.spline(3))
    np.testing.assert_allclose(p.lambdas, 0.0, atol=1e-9)
    assert p.v0 == pytest.approx(1.0, abs=1e-9)
    assert p.v1 == pytest.approx(0.0, abs=1e-9)


def test_linear_is_identity():
    p = init_block("linear", 5, KernelSpec.spline(3), 2.0)
    assert p.lambdas.tolist() == [0.0] * 5 and p.v0 == 1.0 and p.v1 == 0.0
    for x in np.linspace(-2, 2, 41):
        assert abs(lab.forward_scalar(p, x) - x) <= 1e-6


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
def test_matches_reference_solver(kernel):
    from labnet import kernels as K
    pts = make_control_points("random-y", 5, 2.0, np.random.default_rng(3))
    p = solve_init(pts, kernel)
    ref = reference_solve(pts.x, pts.y, lambda r: K.eval(kernel, r))
    np.testing.assert_allclose(np.r_[p.lambdas, p.v0, p.v1], ref, atol=1e-10)


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(KERNELS), st.sampled_from(["random-y", "hockey-stick"]),
       st.sampled_from([3, 5, 7]), st.sampled_from([1.0, 2.0, 4.0]), st.integers(0, 2**32 - 1))
def test_interpolation_and_side_conditions(kernel, strategy, s, r, seed):
    pts = make_control_points(strategy, s, r, np.random.default_rng(seed))
    p = solve_init(pts, kernel)
    for x, y in pts.points:
        assert abs(lab.unclipped_scalar(p, x) - y) <= 1e-8
    assert abs(p.lambdas.sum()) <= 1e-9
    assert abs((p.lambdas * pts.x).sum()) <= 1e-9
    assert np.array_equal(p.centroids, pts.x)


def test_deterministic():
    a = init_block("random-y", 5, KernelSpec.spline(3), 2.0, np.random.default_rng(11))
    b = init_block("random-y", 5, KernelSpec.spline(3), 2.0, np.random.default_rng(11))
    assert a.lambdas.tobytes() == b.lambdas.tobytes() and (a.v0, a.v1) == (b.v0, b.v1)


def test_permuted_then_sorted_is_identical():
    pts = make_control_points("random-y", 7, 2.0, np.random.default_rng(5))
    perm = np.random.default_rng(6).permutation(7)
    x, y = pts.x[perm], pts.y[perm]
    order = np.argsort(x)
    again = solve_init(ControlPointSet(x[order], y[order], 2.0, InitStrategy.RANDOM_Y), KernelSpec.spline(3))
    base = solve_init(pts, KernelSpec.spline(3))
    np.testing.assert_allclose(again.lambdas, base.lambdas, rtol=0, atol=1e-12)


def test_duplicate_centroids_are_singular():
    from labnet.init import interpolation_system
    from labnet import linalg
    a, b = interpolation_system([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], KernelSpec.spline(3))
    with pytest.raises(SingularMatrix):
        linalg.solve(a, b)
