import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modeconn import nn
from modeconn.curves import (CurveSpec, arclength, backprop_to_bends, coefficients, init_bends,
                             make_curve, point_at, velocity_at)
from conftest import central_differences, max_relative_error

KIND_N = [("segment", 0), ("polychain", 1), ("polychain", 3), ("bezier", 1), ("bezier", 3)]


def test_polychain_quarter():
    np.testing.assert_array_equal(coefficients("polychain", 1, 0.25), [0.5, 0.5, 0.0])


def test_quadratic_bezier_midpoint():
    np.testing.assert_allclose(coefficients("bezier", 1, 0.5), [0.25, 0.5, 0.25], atol=1e-16)


@pytest.mark.parametrize("kind,n", KIND_N)
def test_endpoint_coefficients(kind, n):
    c0, c1 = coefficients(kind, n, 0.0), coefficients(kind, n, 1.0)
    assert c0[0] == 1.0 and not c0[1:].any()
    assert c1[-1] == 1.0 and not c1[:-1].any()


@pytest.mark.parametrize("t", [-0.01, 1.01])
def test_t_outside_unit_interval_rejected(t):
    with pytest.raises(ValueError):
        coefficients("bezier", 1, t)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["polychain", "bezier"]), st.integers(1, 6), st.floats(0.0, 1.0))
def test_coefficients_are_affine(kind, n, t):
    c = coefficients(kind, n, t)
    assert abs(c.sum() - 1.0) <= 1e-14
    if kind == "polychain":
        assert np.count_nonzero(c) <= 2


def test_polychain_matches_one_bend_formula(rng):
    w1, th, w2 = rng.standard_normal((3, 5))
    spec = CurveSpec("polychain", w1, w2, [th])
    for t in np.linspace(0, 1, 17):
        if t <= 0.5:
            expected = 2 * (t * th + (0.5 - t) * w1)
        else:
            expected = 2 * ((t - 0.5) * w2 + (1 - t) * th)
        np.testing.assert_allclose(point_at(spec, t), expected, atol=1e-14)


def test_bezier_matches_bernstein_sum(rng):
    pts = rng.standard_normal((5, 4))
    spec = CurveSpec("bezier", pts[0], pts[-1], list(pts[1:-1]))
    for t in [0.1, 0.37, 0.9]:
        expected = sum(math.comb(4, i) * t**i * (1 - t) ** (4 - i) * pts[i] for i in range(5))
        np.testing.assert_allclose(point_at(spec, t), expected, atol=1e-14)


@pytest.mark.parametrize("kind,n", KIND_N)
def test_endpoints_bit_exact(rng, kind, n):
    pts = rng.standard_normal((n + 2, 7))
    spec = CurveSpec(kind, pts[0], pts[-1], list(pts[1:-1]))
    assert np.array_equal(point_at(spec, 0.0), pts[0])
    assert np.array_equal(point_at(spec, 1.0), pts[-1])


def test_polychain_midpoint_is_bend(rng):
    w1, th, w2 = rng.standard_normal((3, 6))
    assert np.array_equal(point_at(CurveSpec("polychain", w1, w2, [th]), 0.5), th)


def test_bezier_in_plane():
    spec = CurveSpec("bezier", [0.0, 0.0], [2.0, 0.0], [[1.0, 1.0]])
    np.testing.assert_allclose(point_at(spec, 0.5), [1.0, 0.5], atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_polychain_continuous_at_knots(rng, n):
    pts = rng.standard_normal((n + 2, 5))
    spec = CurveSpec("polychain", pts[0], pts[-1], list(pts[1:-1]))
    for k in range(1, n + 1):
        knot = k / (n + 1)
        left, right = point_at(spec, np.nextafter(knot, 0)), point_at(spec, np.nextafter(knot, 1))
        np.testing.assert_allclose(left, right, atol=1e-12)
        np.testing.assert_allclose(point_at(spec, knot), pts[k], atol=1e-12)


def test_layout_mismatch_rejected():
    with pytest.raises(ValueError):
        CurveSpec("polychain", np.zeros(3), np.zeros(3), [np.zeros(4)])
    with pytest.raises(ValueError):
        CurveSpec("bezier", np.zeros(3), np.ones(3))
    with pytest.raises(ValueError):
        CurveSpec("segment", np.zeros(3), np.ones(3), [np.zeros(3)])


def test_backprop_polychain_quarter(rng):
    g = rng.standard_normal(4)
    spec = make_curve("polychain", np.zeros(4), np.ones(4))
    np.testing.assert_array_equal(backprop_to_bends(spec, 0.25, g)[0], 0.5 * g)
    assert not backprop_to_bends(spec, 0.0, g)[0].any()


@pytest.mark.parametrize("kind,n", [("polychain", 1), ("bezier", 2)])
def test_velocity_matches_finite_differences(rng, kind, n):
    pts = rng.standard_normal((n + 2, 3))
    spec = CurveSpec(kind, pts[0], pts[-1], list(pts[1:-1]))
    for t in [0.13, 0.41, 0.77]:
        h = 1e-6
        fd = (point_at(spec, t + h) - point_at(spec, t - h)) / (2 * h)
        np.testing.assert_allclose(velocity_at(spec, t), fd, atol=1e-8)


@pytest.mark.parametrize("kind,n", [("polychain", 1), ("polychain", 3), ("bezier", 1),
                                    ("bezier", 3)])
@pytest.mark.parametrize("t", [0.2, 0.55, 0.9])
def test_bend_gradient_matches_finite_differences(kind, n, t):
    rng = np.random.default_rng(n * 10 + int(t * 100))
    cfg = nn.MLPConfig((2, 4, 3), l2_coeff=0.01)
    pts = [nn.init_params(cfg, s) for s in range(n + 2)]
    spec = CurveSpec(kind, pts[0], pts[-1], pts[1:-1])
    X, y = rng.standard_normal((10, 2)), rng.integers(0, 3, 10)
    _, g = nn.loss_and_grad(point_at(spec, t), cfg, X, y)
    grads = backprop_to_bends(spec, t, g)
    for k in range(n):
        def f(b, k=k):
            bends = list(spec.bends)
            bends[k] = b
            return nn.loss(point_at(spec.with_bends(bends), t), cfg, X, y)
        assert max_relative_error(grads[k], central_differences(f, spec.bends[k])) < 1e-5


def test_arclength_collinear_bend_has_ratio_one():
    spec = CurveSpec("polychain", [0.0, 0.0], [2.0, 0.0], [[1.0, 0.0]])
    assert arclength(spec)[1] == pytest.approx(1.0, abs=1e-15)


def test_arclength_right_triangle():
    spec = CurveSpec("polychain", [0.0, 0.0], [2.0, 0.0], [[1.0, 1.0]])
    length, ratio = arclength(spec)
    assert length == pytest.approx(2 * math.sqrt(2), rel=1e-14)
    assert ratio == pytest.approx(math.sqrt(2), rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 50))
def test_bezier_ratio_at_least_one(seed, grid):
    pts = np.random.default_rng(seed).standard_normal((3, 4))
    assert arclength(CurveSpec("bezier", pts[0], pts[2], [pts[1]]), grid)[1] >= 1.0 - 1e-12


def test_arclength_rejects_coincident_endpoints():
    with pytest.raises(ValueError):
        arclength(CurveSpec("bezier", [1.0, 1.0], [1.0, 1.0], [[0.0, 3.0]]))


def test_init_bends_positions(rng):
    a, b = rng.standard_normal((2, 5))
    np.testing.assert_allclose(init_bends(a, b, 1)[0], (a + b) / 2, atol=1e-15)
    for frac, bend in zip([0.25, 0.5, 0.75], init_bends(a, b, 3)):
        np.testing.assert_allclose(bend, a + frac * (b - a), atol=1e-15)


def test_init_bends_jitter_is_seeded(rng):
    a, b = rng.standard_normal((2, 5))
    assert np.array_equal(init_bends(a, b, 2)[1], init_bends(a, b, 2)[1])
    j1, j2 = init_bends(a, b, 2, 0.1, seed=3), init_bends(a, b, 2, 0.1, seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(j1, j2))
    assert not np.array_equal(j1[0], init_bends(a, b, 2)[0])
