import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracocp import kernels as K
from oracles import pair_matrix, polygon_complement


def _ngon(n, r=1.0, phase=0.0):
    th = phase + 2 * np.pi * np.arange(n) / n
    return r * np.column_stack([np.cos(th), np.sin(th)])


def _circle_exterior(x, R, s, n=4096):
    # radial integral in closed form along each ray, trapezoid in the angle
    th = 2 * np.pi * np.arange(n) / n
    e = np.stack([np.cos(th), np.sin(th)], axis=1)
    xe = x @ e.T
    rho = -xe + np.sqrt(xe ** 2 + R ** 2 - x @ x)
    return np.mean(rho ** (-2 * s)) * 2 * np.pi / (2 * s)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_polygon_complement_matches_ray_oracle(s):
    poly = _ngon(7, 1.0, 0.3)
    P, Q = poly, np.roll(poly, -1, axis=0)
    x = np.array([[0.0, 0.0], [0.3, -0.2], [-0.5, 0.4], [0.7, 0.1]])
    got = K.complement_of_polygon(x, P, Q, s)
    ref = polygon_complement(x, poly, s, n_theta=64)
    assert np.allclose(got, ref, rtol=1e-10)


@pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
def test_disc_tail_closed_forms(s):
    R = 2.0
    assert np.isclose(K.disc_tail(np.zeros(2), R, s)[0], np.pi * R ** (-2 * s) / s, rtol=1e-13)
    for x in ([0.5, 0.2], [-0.9, 0.3], [1.2, -1.0]):
        x = np.array(x)
        assert np.isclose(K.disc_tail(x, R, s)[0], _circle_exterior(x, R, s), rtol=1e-9)


@pytest.mark.parametrize("s", [0.3, 0.7])
def test_slivers_plus_tail_equal_polygon_exterior(s):
    R = 2.0
    poly = _ngon(24, R)
    P, Q = poly, np.roll(poly, -1, axis=0)
    x = np.array([[0.1, 0.2], [0.8, -0.5], [-0.3, 0.9]])
    lhs = K.complement_of_polygon(x, P, Q, s)
    rhs = K.sliver_integral(x, P, Q, R, s) + K.disc_tail(x, R, s)
    assert np.allclose(lhs, rhs, rtol=1e-7)


def test_unit_disc_limit_of_polygons():
    s = 0.4
    poly = _ngon(4096)
    val = K.complement_of_polygon(np.zeros((1, 2)), poly, np.roll(poly, -1, axis=0), s)[0]
    assert np.isclose(val, np.pi / s, rtol=1e-5)


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_identical_pair_against_polar_oracle(s):
    V = np.array([[0.0, 0.0], [1.0, 0.1], [0.3, 0.8]])
    got = K.identical_pair(V[None], s)[0]
    _, ref = pair_matrix(V, (0, 1, 2), (0, 1, 2), s)
    assert np.max(np.abs(got - ref)) <= 1e-4 * np.max(np.abs(ref))
    assert np.allclose(got, got.T)
    assert np.allclose(got.sum(axis=1), 0.0, atol=1e-10 * np.abs(got).max())


@pytest.mark.parametrize("s", [0.3, 0.7])
def test_edge_pair_against_polar_oracle(s):
    V = np.array([[0.0, 0.0], [1.0, 0.0], [0.4, 0.9], [0.6, -0.7]])
    A, B, C, D = (V[i][None] for i in range(4))
    got = K.edge_pair(A, B, C, D, s)[0]
    _, ref = pair_matrix(V, (0, 1, 2), (0, 1, 3), s)
    assert np.max(np.abs(got - ref)) <= 1e-4 * np.max(np.abs(ref))


@given(st.floats(0.1, 0.9), st.sampled_from([0.5, 2.0]))
def test_identical_pair_scaling_law(s, rho):
    V = np.array([[0.0, 0.0], [1.0, 0.2], [0.1, 0.9]])[None]
    a = K.identical_pair(V, s)[0]
    b = K.identical_pair(rho * V, s)[0]
    assert np.allclose(b, rho ** (2 - 2 * s) * a, rtol=1e-10)


@given(st.floats(0.0, 2 * np.pi), st.floats(-3, 3), st.floats(-3, 3))
def test_identical_pair_rigid_motion_invariance(theta, tx, ty):
    V = np.array([[0.0, 0.0], [1.0, 0.2], [0.1, 0.9]])
    Rm = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    W = V @ Rm.T + np.array([tx, ty])
    assert np.allclose(K.identical_pair(V[None], 0.6)[0], K.identical_pair(W[None], 0.6)[0], rtol=1e-9)
