"""Quadrature rules on the reference triangle and the unit interval.

Triangle rules are returned in barycentric form: ``bary`` has shape
``(n, 3)`` and ``weights`` sum to one, so that for a physical triangle of
area ``|T|`` the integral of ``f`` is ``|T| * sum(weights * f(points))``.
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

# Dunavant degree-4 rule (6 points, positive weights).
_D4_A = 0.445948490915965
_D4_B = 0.091576213509771
_D4_WA = 0.223381589678011
_D4_WB = 0.109951743655322


@lru_cache(maxsize=None)
def gauss_legendre01(n):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi01(n, power):
    """Gauss rule on [0, 1] for the weight ``t**power``."""
    # roots_jacobi uses the weight (1-x)^a (1+x)^b on [-1, 1]
    x, w = roots_jacobi(n, 0.0, power)
    return 0.5 * (x + 1.0), w * 0.5 ** (power + 1.0)


@lru_cache(maxsize=None)
def _conical(n):
    # collapsed (Stroud) product rule, exact for degree 2n - 1
    u, wu = gauss_jacobi01(n, 1.0)  # weight u on the collapsed direction
    v, wv = gauss_legendre01(n)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ww = np.outer(wu, wv)
    # physical reference point: (1-u) + u*(1-v) e1 + u*v e2 in barycentrics
    lam1 = (uu * (1.0 - vv)).ravel()
    lam2 = (uu * vv).ravel()
    lam0 = 1.0 - lam1 - lam2
    bary = np.column_stack([lam0, lam1, lam2])
    weights = 2.0 * ww.ravel()
    return bary, weights


@lru_cache(maxsize=None)
def _triangle_rule_cached(order):
    if order <= 1:
        return np.array([[1.0, 1.0, 1.0]]) / 3.0, np.array([1.0])
    if order == 2:
        bary = np.array([[4.0, 1.0, 1.0], [1.0, 4.0, 1.0], [1.0, 1.0, 4.0]]) / 6.0
        return bary, np.full(3, 1.0 / 3.0)
    if order in (3, 4):
        a, b = _D4_A, _D4_B
        bary = np.array([
            [a, a, 1 - 2 * a], [a, 1 - 2 * a, a], [1 - 2 * a, a, a],
            [b, b, 1 - 2 * b], [b, 1 - 2 * b, b], [1 - 2 * b, b, b],
        ])
        w = np.array([_D4_WA] * 3 + [_D4_WB] * 3)
        return bary, w / w.sum()
    return _conical((order + 2) // 2)


def triangle_rule(order):
    """Return ``(bary, weights)`` exact for polynomials of total degree ``order``."""
    bary, w = _triangle_rule_cached(int(order))
    return bary.copy(), w.copy()


def subdivided_rule(order, levels=1):
    """Composite rule on ``4**levels`` congruent sub-triangles."""
    bary, w = triangle_rule(order)
    for _ in range(levels):
        # corners of the 4 children in barycentrics of the parent
        e = np.eye(3)
        m01, m12, m02 = (e[0] + e[1]) / 2, (e[1] + e[2]) / 2, (e[0] + e[2]) / 2
        children = [(e[0], m01, m02), (m01, e[1], m12), (m02, m12, e[2]), (m12, m02, m01)]
        new_b, new_w = [], []
        for c in children:
            corners = np.array(c)
            new_b.append(bary @ corners)
            new_w.append(w / 4.0)
        bary, w = np.vstack(new_b), np.concatenate(new_w)
    return bary, w


@lru_cache(maxsize=None)
def _graded_rule_cached(order, corners, edges, levels):
    base_b, base_w = triangle_rule(order)
    out_b, out_w = [], []
    tol = 1e-14

    def singular(tri):
        # touches a flagged corner, or has an edge on a flagged side (lambda_k = 0)
        for k in corners:
            if any(v[k] > 1 - tol for v in tri):
                return True
        for k in edges:
            if sum(v[k] < tol for v in tri) >= 2:
                return True
        return False

    def split(tri, weight, depth):
        a, b, c = tri
        mab, mbc, mac = (a + b) / 2, (b + c) / 2, (a + c) / 2
        for kid in ((a, mab, mac), (mab, b, mbc), (mac, mbc, c), (mbc, mac, mab)):
            if depth > 1 and singular(kid):
                split(kid, weight / 4.0, depth - 1)
            else:
                out_b.append(base_b @ np.array(kid))
                out_w.append(base_w * weight / 4.0)

    e = np.eye(3)
    split((e[0], e[1], e[2]), 1.0, levels)
    return np.vstack(out_b), np.concatenate(out_w)


def graded_rule(order, corners=(), sides=(), levels=8):
    """Split into 4 once, then keep splitting children that touch singular features.

    ``corners`` are local vertex indices and ``sides`` indices ``k`` of the
    sides ``lambda_k = 0`` (the side opposite vertex ``k``). Suited to
    integrands with a vertex or edge singularity; with no features this is
    ``subdivided_rule(order, 1)``.
    """
    corners = tuple(sorted(int(c) for c in corners))
    sides = tuple(sorted(int(k) for k in sides))
    bary, w = _graded_rule_cached(int(order), corners, sides, int(levels))
    return bary.copy(), w.copy()
