"""Element-level integrals of the kernel ``|x - y|^(-2-2s)`` in the plane.

Conventions: a triangle is given by its vertex coordinates, barycentric
coordinates are ordered like the vertices, and all routines are vectorized
over a leading batch axis.

Touching pairs use Sauter-Schwab type coordinates on the reference pair
``{0 <= r2 <= r1 <= 1}``, ``x = P1 + r1 (P2 - P1) + r2 (P3 - P2)``. After the
change of variables the radial-like variables are integrated exactly, which
leaves a smooth integrand for Gauss-Legendre rules.
"""

import numpy as np
from scipy.special import beta, betainc, hyp2f1

from .quadrature import gauss_jacobi01, gauss_legendre01


def _cube_rule(n, dim):
    x, w = gauss_legendre01(n)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wg = w
    for _ in range(dim - 1):
        wg = np.multiply.outer(wg, w)
    return [g.ravel() for g in grids], wg.ravel()


def _area(P):
    d1 = P[..., 1, :] - P[..., 0, :]
    d2 = P[..., 2, :] - P[..., 0, :]
    return 0.5 * np.abs(d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0])


def bary_gradients(P):
    """Gradients of the barycentric coordinates, shape ``(..., 3, 2)``."""
    d1 = P[..., 1, :] - P[..., 0, :]
    d2 = P[..., 2, :] - P[..., 0, :]
    det = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
    g1 = np.stack([d2[..., 1], -d2[..., 0]], axis=-1) / det[..., None]
    g2 = np.stack([-d1[..., 1], d1[..., 0]], axis=-1) / det[..., None]
    return np.stack([-g1 - g2, g1, g2], axis=-2)


# ---------------------------------------------------------------------------
# identical pair


def identical_pair(P, s, n=8):
    """``I_ab = int_T int_T (l_a(x)-l_a(y)) (l_b(x)-l_b(y)) |x-y|^(-2-2s)``.

    Uses the overlap area of a triangle with its translate, which leaves a
    one-dimensional integral over directions.
    """
    P = np.asarray(P, dtype=float)
    g = bary_gradients(P)  # (m, 3, 2)
    area = _area(P)
    m = P.shape[0]
    # breakpoints where some g_k . e changes sign
    ang = np.arctan2(g[..., 1], g[..., 0])  # (m, 3)
    br = np.concatenate([ang + 0.5 * np.pi, ang - 0.5 * np.pi], axis=1) % (2 * np.pi)
    br = np.sort(br, axis=1)
    br = np.concatenate([br, br[:, :1] + 2 * np.pi], axis=1)  # (m, 7)
    t, w = gauss_legendre01(n)
    lo, hi = br[:, :-1], br[:, 1:]
    theta = lo[..., None] + (hi - lo)[..., None] * t  # (m, 6, n)
    wt = (hi - lo)[..., None] * w
    e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)  # (m, 6, n, 2)
    ge = np.einsum("mkd,mjqd->mjqk", g, e)  # (m, 6, n, 3)
    inv_rho = np.maximum(ge, 0.0).sum(axis=-1)
    f = inv_rho ** (2 * s - 2) * wt
    out = np.einsum("mjq,mjqa,mjqb->mab", f, ge, ge)
    bfac = 2.0 / ((2 - 2 * s) * (3 - 2 * s) * (4 - 2 * s))
    return out * (area * bfac)[:, None, None]


# ---------------------------------------------------------------------------
# common edge: T = (A, B, C), T' = (A, B, D)


def _edge_regions(e2, e3, e1=None):
    """Return list of (delta1, r2, r2p, jac) with the factor xi*eta1 removed."""
    one = np.ones_like(e2)
    return [
        (e2, e3, 1 - e2, one),
        (e2 * e3, one, e2 * (1 - e3), e2),
        (-e2, 1 - e2, e2 * e3, e2),
        (-e2 * e3, e2 * (1 - e3), one, e2),
        (-e2 * e3, 1 - e2 * e3, e2, e2),
    ]


def edge_pair(A, B, C, D, s, n=5):
    """Local 4x4 matrix over vertices (A, B, C, D) of the full difference integrand."""
    (e2, e3), w = _cube_rule(n, 2)
    BA, CB, DB = B - A, C - B, D - B
    res = np.zeros((A.shape[0], 4, 4))
    for d1, r2, r2p, jac in _edge_regions(e2, e3):
        X = d1[:, None, None] * BA[None] + r2[:, None, None] * CB[None] - r2p[:, None, None] * DB[None]
        k = np.sum(X * X, axis=-1) ** (-1.0 - s)  # (q, m)
        dl = np.stack([-d1, d1 - r2 + r2p, r2, -r2p], axis=-1)  # (q, 4)
        wk = (w * jac)[:, None] * k
        res += np.einsum("qm,qa,qb->mab", wk, dl, dl)
    aT = _area(np.stack([A, B, C], axis=1))
    aTp = _area(np.stack([A, B, D], axis=1))
    fac = 4.0 * aT * aTp / ((4 - 2 * s) * (3 - 2 * s))
    return res * fac[:, None, None]


def edge_pair_onesided(A, B, C, D, s, n=5):
    """``int_T l_C(x)^2 int_T' |x-y|^(-2-2s) dy dx`` for T = (A,B,C), T' = (A,B,D)."""
    (e2, e3), w = _cube_rule(n, 2)
    BA, CB, DB = B - A, C - B, D - B
    res = np.zeros(A.shape[0])
    for d1, r2, r2p, jac in _edge_regions(e2, e3):
        X = d1[:, None, None] * BA[None] + r2[:, None, None] * CB[None] - r2p[:, None, None] * DB[None]
        k = np.sum(X * X, axis=-1) ** (-1.0 - s)
        res += ((w * jac * r2 * r2)[:, None] * k).sum(axis=0)
    aT = _area(np.stack([A, B, C], axis=1))
    aTp = _area(np.stack([A, B, D], axis=1))
    return res * 4.0 * aT * aTp / ((4 - 2 * s) * (3 - 2 * s))


# ---------------------------------------------------------------------------
# common vertex: T = (A, B, C), T' = (A, D, E)


def _vertex_regions(e1, e2, e3):
    # (r1, r2, r1p, r2p) with the factor xi removed; jacobian xi^3 * eta2
    return [
        (np.ones_like(e1), e1, e2, e2 * e3),
        (e2, e2 * e3, np.ones_like(e1), e1),
    ]


def vertex_pair(A, B, C, D, E, s, n=5):
    """Local 5x5 matrix over vertices (A, B, C, D, E)."""
    (e1, e2, e3), w = _cube_rule(n, 3)
    BA, CB, DA, ED = B - A, C - B, D - A, E - D
    res = np.zeros((A.shape[0], 5, 5))
    for r1, r2, r1p, r2p in _vertex_regions(e1, e2, e3):
        X = (r1[:, None, None] * BA[None] + r2[:, None, None] * CB[None]
             - r1p[:, None, None] * DA[None] - r2p[:, None, None] * ED[None])
        k = np.sum(X * X, axis=-1) ** (-1.0 - s)
        dl = np.stack([r1p - r1, r1 - r2, r2, -(r1p - r2p), -r2p], axis=-1)
        wk = (w * e2)[:, None] * k
        res += np.einsum("qm,qa,qb->mab", wk, dl, dl)
    aT = _area(np.stack([A, B, C], axis=1))
    aTp = _area(np.stack([A, D, E], axis=1))
    fac = 4.0 * aT * aTp / (4 - 2 * s)
    return res * fac[:, None, None]


def vertex_pair_onesided(A, B, C, D, E, s, n=5):
    """2x2 matrix over (B, C) of ``int_T l_a l_b(x) int_T' |x-y|^(-2-2s)``."""
    (e1, e2, e3), w = _cube_rule(n, 3)
    BA, CB, DA, ED = B - A, C - B, D - A, E - D
    res = np.zeros((A.shape[0], 2, 2))
    for r1, r2, r1p, r2p in _vertex_regions(e1, e2, e3):
        X = (r1[:, None, None] * BA[None] + r2[:, None, None] * CB[None]
             - r1p[:, None, None] * DA[None] - r2p[:, None, None] * ED[None])
        k = np.sum(X * X, axis=-1) ** (-1.0 - s)
        lam = np.stack([r1 - r2, r2], axis=-1)
        wk = (w * e2)[:, None] * k
        res += np.einsum("qm,qa,qb->mab", wk, lam, lam)
    aT = _area(np.stack([A, B, C], axis=1))
    aTp = _area(np.stack([A, D, E], axis=1))
    fac = 4.0 * aT * aTp / (4 - 2 * s)
    return res * fac[:, None, None]


# ---------------------------------------------------------------------------
# regions away from x


def edge_potential(x, P, Q, s):
    """Contribution of oriented segments P->Q seen from points x.

    ``x`` has shape ``(..., m, 2)`` and ``P``, ``Q`` shape ``(..., e, 2)``;
    the result has shape ``(..., m, e)``. For a polygon N traversed
    counterclockwise and x in its interior,
    ``int_{R^2 \\ N} |x-y|^(-2-2s) dy = sum(edge_potential) / (2 s)``.
    """
    PQ = Q - P
    L = np.linalg.norm(PQ, axis=-1)
    tv = PQ / L[..., None]
    nv = np.stack([tv[..., 1], -tv[..., 0]], axis=-1)
    rel = P[..., None, :, :] - x[..., :, None, :]
    d = np.sum(rel * nv[..., None, :, :], axis=-1)
    t1 = np.sum(rel * tv[..., None, :, :], axis=-1)
    t2 = t1 + L[..., None, :]
    ad = np.abs(d)
    safe = np.where(ad > 0, ad, 1.0)
    half_b = 0.5 * beta(0.5, s + 0.5)
    d2 = safe * safe

    def G(t):
        # int_0^{t/|d|} (1 + u^2)^(-1-s) du via the complementary incomplete beta
        return np.sign(t) * half_b * (1.0 - betainc(s + 0.5, 0.5, d2 / (d2 + t * t)))

    out = np.sign(d) * safe ** (-2 * s) * (G(t2) - G(t1))
    return np.where(ad > 0, out, 0.0)


def complement_of_polygon(x, P, Q, s):
    """``int_{R^2 \\ N} |x-y|^(-2-2s) dy`` for x inside N with ccw boundary edges P->Q."""
    return edge_potential(x, P, Q, s).sum(axis=1) / (2 * s)


def disc_tail(x, R, s, order=16):
    """``int_{|y| > R} |x-y|^(-2-2s) dy`` for ``|x| < R`` by radial Gauss-Jacobi."""
    r = np.linalg.norm(np.atleast_2d(x), axis=1)
    t, w = gauss_jacobi01(order, 2 * s - 1)
    rho = R / t
    a = rho[None, :] ** 2 + r[:, None] ** 2
    bb = 2 * r[:, None] * rho[None, :]
    nu = 1.0 + s
    F = hyp2f1(nu / 2, (nu + 1) / 2, 1.0, (bb / a) ** 2)
    f = (R * R + (r[:, None] * t[None, :]) ** 2) ** (-nu) * F
    return 2 * np.pi * R * R * (f * w).sum(axis=1)


def sliver_integral(x, P, Q, R, s, n_theta=4, n_r=3):
    """Integral over the circular segments between chords P->Q and the circle ``|y| = R``.

    P and Q lie on the circle and are ordered counterclockwise.
    """
    x = np.atleast_2d(x)
    th0 = np.arctan2(P[:, 1], P[:, 0])
    th1 = np.arctan2(Q[:, 1], Q[:, 0])
    dth = (th1 - th0) % (2 * np.pi)
    mid = th0 + 0.5 * dth
    dist = R * np.cos(0.5 * dth)  # chord distance from the origin
    tt, wt = gauss_legendre01(n_theta)
    tr, wr = gauss_legendre01(n_r)
    th = th0[:, None] + dth[:, None] * tt  # (e, nt)
    rc = dist[:, None] / np.cos(th - mid[:, None])
    rr = rc[..., None] + (R - rc)[..., None] * tr  # (e, nt, nr)
    wts = (dth[:, None] * wt)[..., None] * ((R - rc)[..., None] * wr) * rr
    y = np.stack([rr * np.cos(th)[..., None], rr * np.sin(th)[..., None]], axis=-1).reshape(-1, 2)
    wts = wts.ravel()
    out = np.empty(len(x))
    step = max(1, 4_000_000 // max(1, len(y)))
    for i in range(0, len(x), step):
        xx = x[i:i + step]
        d2 = ((xx[:, None, :] - y[None, :, :]) ** 2).sum(axis=-1)
        out[i:i + step] = (d2 ** (-1.0 - s)) @ wts
    return out
