import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracocp.quadrature import gauss_jacobi01, gauss_legendre01, subdivided_rule, triangle_rule


def _monomial_exact(i, j):
    # int over the reference triangle of x^i y^j
    return math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5, 7, 8, 12])
def test_triangle_rule_exact_for_its_degree(order):
    bary, w = triangle_rule(order)
    assert np.isclose(w.sum(), 1.0)
    assert np.all(bary >= -1e-14) and np.allclose(bary.sum(axis=1), 1.0)
    x, y = bary[:, 1], bary[:, 2]
    for i in range(order + 1):
        for j in range(order + 1 - i):
            assert np.isclose(0.5 * np.sum(w * x ** i * y ** j), _monomial_exact(i, j), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("levels", [1, 2])
def test_subdivided_rule_keeps_exactness(levels):
    bary, w = subdivided_rule(7, levels)
    assert len(w) == 4 ** levels * len(triangle_rule(7)[1])
    x, y = bary[:, 1], bary[:, 2]
    assert np.isclose(0.5 * np.sum(w * x ** 3 * y ** 4), _monomial_exact(3, 4), rtol=1e-12)


@given(st.integers(1, 12), st.floats(-0.9, 2.0))
def test_gauss_jacobi_integrates_weighted_polynomials(n, power):
    t, w = gauss_jacobi01(n, power)
    for k in range(2 * n):
        assert np.isclose(np.sum(w * t ** k), 1.0 / (k + power + 1.0), rtol=1e-10)


def test_gauss_legendre_on_unit_interval():
    t, w = gauss_legendre01(5)
    assert np.isclose(w.sum(), 1.0) and np.all((t > 0) & (t < 1))
    assert np.isclose(np.sum(w * t ** 9), 0.1)
