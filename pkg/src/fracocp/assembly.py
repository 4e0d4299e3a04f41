"""Finite element operators for the integral fractional Laplacian.

The stiffness matrix realizes

    A_ij = C(2,s)/2 * [ int_Omega int_Omega (phi_i(x)-phi_i(y)) (phi_j(x)-phi_j(y)) k(x,y)
                        + 2 int_Omega phi_i phi_j w(x) ],

with ``k(x,y) = |x-y|^(-2-2s)`` and ``w(x) = int_{Omega^c} k(x,y) dy``.

Splitting per element pair, the terms are grouped as

    S   touching pairs (identical, common edge, common vertex), full integrand,
        via singularity-removing coordinates;
    D   sum_T int_T phi_i phi_j W_T(x) with W_T(x) = int_{R^2 \\ N(T)} k(x,y) dy,
        where N(T) is the patch of Omega triangles touching T. Band triangles
        touching T use the same singular coordinates; the remaining band and
        the Omega triangles away from T are integrated in closed form through
        their boundary edges; beyond the band, circular segments plus a radial
        Gauss-Jacobi tail;
    C   sum over disjoint pairs of int int phi_i(x) phi_j(y) k, by tensor
        Gauss rules whose order increases for close pairs.

so that ``A = C(2,s)/2 * (S + 2 D - 2 C)``.
"""

import hashlib
import logging
import os
import struct
import time
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, LinAlgError
from scipy.spatial import cKDTree
from scipy.special import gamma

from . import kernels as K
from .mesh import boundary_edges
from .quadrature import triangle_rule

log = logging.getLogger(__name__)

CACHE_MAGIC = b"FRAC1"
_HEADER = struct.Struct("<5sIdI32sII")


class AssemblyError(RuntimeError):
    pass


class PairKind(Enum):
    IDENTICAL = "identical"
    EDGE_ADJACENT = "edge_adjacent"
    VERTEX_ADJACENT = "vertex_adjacent"
    DISJOINT = "disjoint"


def classify_pair(tri1, tri2):
    shared = len(set(int(v) for v in tri1) & set(int(v) for v in tri2))
    return {3: PairKind.IDENTICAL, 2: PairKind.EDGE_ADJACENT,
            1: PairKind.VERTEX_ADJACENT, 0: PairKind.DISJOINT}[shared]


@dataclass(frozen=True)
class QuadratureConfig:
    """Quadrature knobs.

    gauss_order_regular: polynomial degree of the triangle rule for far pairs.
    duffy_order_singular: Gauss points per direction after the singular
        coordinate change (touching pairs).
    near_order, close_order: triangle rule degrees for disjoint pairs whose
        vertex distance is below ``near_ratio * h`` and ``close_ratio * h``.
    weight_order: rule for the ``phi_i phi_j W_T`` terms.
    tail_order: radial Gauss-Jacobi points for ``|y| > R``.
    """

    gauss_order_regular: int = 4
    duffy_order_singular: int = 7
    near_order: int = 7
    close_order: int = 12
    near_ratio: float = 4.0
    close_ratio: float = 1.0
    weight_order: int = 7
    identical_points: int = 8
    tail_order: int = 16
    sliver_points: tuple = (4, 3)

    def __post_init__(self):
        if self.gauss_order_regular < 2 or self.duffy_order_singular < 2:
            raise ValueError("quadrature orders must be >= 2")
        if self.duffy_order_singular < self.gauss_order_regular:
            raise ValueError("singular order must be >= regular order")
        if self.tail_order < 1 or self.close_ratio > self.near_ratio:
            raise ValueError("invalid tail order or near-pair thresholds")

    def digest(self):
        return hashlib.sha256(repr(sorted(asdict(self).items())).encode()).hexdigest()


@dataclass
class OperatorSet:
    A: np.ndarray
    M: sp.csr_matrix
    s: float
    Cds: float
    mesh_fingerprint: bytes
    basis_integrals: np.ndarray  # int phi_i over Omega, per DOF
    fe: "FEQuadrature" = None  # order-4 rule used for nonlinear terms and loads

    @property
    def n_dofs(self):
        return self.A.shape[0]


def normalization_constant(d, s):
    """``C(d,s) = 2^{2s} s Gamma(s + d/2) / (pi^{d/2} Gamma(1 - s))``."""
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    if d != 2:
        raise ValueError("only d = 2 is supported")
    return 2.0 ** (2 * s) * s * gamma(s + d / 2) / (np.pi ** (d / 2) * gamma(1 - s))


# ---------------------------------------------------------------------------
# P1 quadrature data


@dataclass(frozen=True)
class FEQuadrature:
    """Quadrature points on the Omega triangles with P1 basis values."""

    points: np.ndarray   # (nT, nq, 2)
    weights: np.ndarray  # (nT, nq), include |T|
    basis: np.ndarray    # (nq, 3)
    dofs: np.ndarray     # (nT, 3), -1 for boundary vertices
    triangles: np.ndarray

    def interpolate(self, nodal_dofs):
        """Values at quadrature points of the P1 function with DOF vector ``nodal_dofs``."""
        ext = np.concatenate([np.asarray(nodal_dofs, dtype=float), [0.0]])
        return ext[self.dofs] @ self.basis.T

    def interpolate_vertices(self, nodal):
        return np.asarray(nodal)[self.triangles] @ self.basis.T

    def integrate(self, values):
        return float(np.sum(self.weights * values))

    def load(self, values, n):
        """``b_i = sum_q w_q f_q phi_i(x_q)`` for values at the quadrature points."""
        contrib = np.einsum("tq,qa->ta", self.weights * values, self.basis)
        keep = self.dofs >= 0
        return np.bincount(self.dofs[keep], weights=contrib[keep], minlength=n)

    def reaction(self, coeff, n):
        """Sparse ``int c phi_i phi_j`` for values of ``c`` at the quadrature points."""
        local = np.einsum("tq,qa,qb->tab", self.weights * coeff, self.basis, self.basis)
        return _scatter_dofs(self.dofs, local, n)


def fe_quadrature(mesh, dofmap, order=4):
    bary, w = triangle_rule(order)
    P = mesh.vertices[mesh.triangles]
    pts = np.einsum("qk,tkd->tqd", bary, P)
    wts = mesh.areas[:, None] * w[None, :]
    dofs = dofmap.node_to_dof[mesh.triangles]
    return FEQuadrature(pts, wts, bary, dofs, np.asarray(mesh.triangles))


def _scatter_dofs(dofs, local, n):
    """Sum local (nT, 3, 3) matrices into a sparse n x n matrix, skipping -1 entries."""
    rows = np.repeat(dofs[:, :, None], 3, axis=2)
    cols = np.repeat(dofs[:, None, :], 3, axis=1)
    keep = (rows >= 0) & (cols >= 0)
    return sp.coo_matrix((local[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()


def assemble_mass(mesh, dofmap, full=False):
    """P1 mass matrix on the DOFs (or on all vertices if ``full``)."""
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    loc = mesh.areas[:, None, None] * local[None]
    if full:
        n = mesh.n_vertices
        return _scatter_dofs(np.asarray(mesh.triangles), loc, n)
    return _scatter_dofs(dofmap.node_to_dof[mesh.triangles], loc, dofmap.n_dofs)


def basis_integrals(mesh, dofmap):
    """``int_Omega phi_i dx`` for every DOF (row sums of the all-vertex mass matrix)."""
    b = np.zeros(mesh.n_vertices)
    np.add.at(b, mesh.triangles.ravel(), np.repeat(mesh.areas / 3.0, 3))
    return b[dofmap.interior_nodes]


def _qp_values(mesh, fq, field):
    """Evaluate a callable, nodal (all vertices) or quadrature-point field."""
    if callable(field):
        return np.asarray(field(fq.points), dtype=float) * np.ones(fq.weights.shape)
    arr = np.asarray(field, dtype=float)
    if arr.ndim == 0:
        return np.full(fq.weights.shape, float(arr))
    if arr.shape == fq.weights.shape:
        return arr
    if arr.shape == (mesh.n_vertices,):
        return fq.interpolate_vertices(arr)
    raise ValueError(f"cannot interpret field of shape {arr.shape}")


def assemble_weighted_reaction(mesh, dofmap, coefficient, fq=None):
    """``R_ij = int c phi_i phi_j`` with the order-4 rule; ``c`` must be nonnegative."""
    fq = fq or fe_quadrature(mesh, dofmap)
    c = _qp_values(mesh, fq, coefficient)
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ValueError("reaction coefficient must be finite and nonnegative")
    return fq.reaction(c, dofmap.n_dofs)


def assemble_load(mesh, dofmap, f, fq=None):
    """``b_i = int f phi_i``; a length-nT array is read as a P0 field (exact)."""
    if not callable(f):
        arr = np.asarray(f, dtype=float)
        if arr.shape == (mesh.n_triangles,):
            contrib = np.repeat((arr * mesh.areas / 3.0)[:, None], 3, axis=1)
            d = dofmap.node_to_dof[mesh.triangles]
            keep = d >= 0
            return np.bincount(d[keep], weights=contrib[keep], minlength=dofmap.n_dofs)
    fq = fq or fe_quadrature(mesh, dofmap)
    return fq.load(_qp_values(mesh, fq, f), dofmap.n_dofs)


# ---------------------------------------------------------------------------
# stiffness pieces (all on the compact Omega-vertex numbering)


def _incidence(tris, nv):
    m = len(tris)
    return sp.csr_matrix((np.ones(3 * m), (np.repeat(np.arange(m), 3), tris.ravel())), shape=(m, nv))


def _shared_pairs(tris_a, tris_b, nv, upper=False):
    """Pairs (i, j) sharing at least one vertex, with the shared count."""
    S = (_incidence(tris_a, nv) @ _incidence(tris_b, nv).T).tocoo()
    i, j, c = S.row, S.col, S.data.astype(int)
    if upper:
        keep = i < j
        i, j, c = i[keep], j[keep], c[keep]
    order = np.lexsort((j, i))
    return i[order], j[order], c[order]


def _accumulate(out, ids, local):
    """out[ids[:, a], ids[:, b]] += local[:, a, b] for a batch of local matrices."""
    n = out.shape[0]
    k = ids.shape[1]
    rows = np.repeat(ids[:, :, None], k, axis=2).ravel()
    cols = np.repeat(ids[:, None, :], k, axis=1).ravel()
    out += np.bincount(rows * n + cols, weights=local.ravel(), minlength=n * n).reshape(n, n)


def _split_edge_pair(ti, tj):
    """Order vertices as (a, b, c) in ti and d in tj with {a, b} shared."""
    in_j = (ti[:, :, None] == tj[:, None, :]).any(axis=2)
    in_i = (tj[:, :, None] == ti[:, None, :]).any(axis=2)
    # roll ti so that the non-shared vertex is last
    pos = np.argmin(in_j, axis=1)
    idx = (pos[:, None] + np.array([1, 2, 0])[None, :]) % 3
    abc = np.take_along_axis(ti, idx, axis=1)
    d = tj[~in_i]
    return abc, d


def _split_vertex_pair(ti, tj):
    """Order as (a, b, c) in ti and (a, d, e) in tj with a shared."""
    eq = ti[:, :, None] == tj[:, None, :]
    pi = np.argmax(eq.any(axis=2), axis=1)
    pj = np.argmax(eq.any(axis=1), axis=1)
    abc = np.take_along_axis(ti, (pi[:, None] + np.arange(3)[None, :]) % 3, axis=1)
    ade = np.take_along_axis(tj, (pj[:, None] + np.arange(3)[None, :]) % 3, axis=1)
    return abc, ade


def _chunks(n, size):
    for i in range(0, n, size):
        yield slice(i, min(n, i + size))


def _touching_part(V, tris, s, quad):
    """S: identical plus twice the unordered edge and vertex pairs."""
    n = len(V)
    out = np.zeros((n, n))
    for sl in _chunks(len(tris), 4000):
        _accumulate(out, tris[sl], K.identical_pair(V[tris[sl]], s, quad.identical_points))
    i, j, c = _shared_pairs(tris, tris, n, upper=True)
    nd = quad.duffy_order_singular
    e = c == 2
    if e.any():
        abc, d = _split_edge_pair(tris[i[e]], tris[j[e]])
        for sl in _chunks(len(d), 4000):
            loc = K.edge_pair(V[abc[sl, 0]], V[abc[sl, 1]], V[abc[sl, 2]], V[d[sl]], s, nd)
            _accumulate(out, np.column_stack([abc[sl], d[sl]]), 2.0 * loc)
    v = c == 1
    if v.any():
        abc, ade = _split_vertex_pair(tris[i[v]], tris[j[v]])
        for sl in _chunks(len(abc), 1500):
            loc = K.vertex_pair(V[abc[sl, 0]], V[abc[sl, 1]], V[abc[sl, 2]],
                                V[ade[sl, 1]], V[ade[sl, 2]], s, nd)
            _accumulate(out, np.column_stack([abc[sl], ade[sl, 1:]]), 2.0 * loc)
    return out


def _patch_boundaries(tris_all, centers, nv):
    """For each Omega triangle, ccw boundary edges of the union of triangles touching it."""
    inc_all = _incidence(tris_all, nv)
    adj = (_incidence(centers, nv) @ inc_all.T).tocsr()
    result = []
    for t in range(len(centers)):
        nb = adj.indices[adj.indptr[t]:adj.indptr[t + 1]]
        tt = tris_all[nb]
        e = np.concatenate([tt[:, [0, 1]], tt[:, [1, 2]], tt[:, [2, 0]]])
        key = e[:, 0] * nv + e[:, 1]
        rev = e[:, 1] * nv + e[:, 0]
        result.append(e[~np.isin(key, rev)])
    return result


def _weight_part(V, tris, patch_edges, outer_weight, s, quad):
    """D: sum_T int_T phi_a phi_b W_T with W_T = patch-complement minus outer part."""
    n = len(V)
    bary, w = triangle_rule(quad.weight_order)
    P = V[tris]
    x = np.einsum("qk,tkd->tqd", bary, P)  # (nT, nq, 2)
    emax = max(len(e) for e in patch_edges)
    Pe = np.zeros((len(tris), emax, 2))
    Qe = np.zeros((len(tris), emax, 2))
    mask = np.zeros((len(tris), emax))
    for t, e in enumerate(patch_edges):
        Pe[t, :len(e)] = V[e[:, 0]]
        Qe[t, :len(e)] = V[e[:, 1]]
        mask[t, :len(e)] = 1.0
        # padding: a unit segment far away, masked out below
        Pe[t, len(e):] = (1e6, 0.0)
        Qe[t, len(e):] = (1e6, 1.0)
    W = np.empty(x.shape[:2])
    for sl in _chunks(len(tris), 2000):
        E = K.edge_potential(x[sl], Pe[sl], Qe[sl], s)  # (t, q, e)
        W[sl] = np.einsum("tqe,te->tq", E, mask[sl]) / (2 * s)
    W += outer_weight(x.reshape(-1, 2)).reshape(W.shape)
    areas = 0.5 * np.abs((P[:, 1, 0] - P[:, 0, 0]) * (P[:, 2, 1] - P[:, 0, 1])
                         - (P[:, 1, 1] - P[:, 0, 1]) * (P[:, 2, 0] - P[:, 0, 0]))
    local = np.einsum("tq,qa,qb->tab", W * w[None, :] * areas[:, None], bary, bary)
    out = np.zeros((n, n))
    _accumulate(out, tris, local)
    return out


def _band_touching_part(V, tris, band, omega_boundary, s, quad):
    """int_T phi_a phi_b int_T' k for band triangles T' touching T (interior vertices only)."""
    n = len(V)
    out = np.zeros((n, n))
    i, j, c = _shared_pairs(tris, band, n)
    nd = quad.duffy_order_singular
    e = c == 2
    if e.any():
        abc, d = _split_edge_pair(tris[i[e]], band[j[e]])
        keep = ~omega_boundary[abc[:, 2]]
        abc, d = abc[keep], d[keep]
        if len(d):
            val = K.edge_pair_onesided(V[abc[:, 0]], V[abc[:, 1]], V[abc[:, 2]], V[d], s, nd)
            np.add.at(out, (abc[:, 2], abc[:, 2]), val)
    v = c == 1
    if v.any():
        abc, ade = _split_vertex_pair(tris[i[v]], band[j[v]])
        for sl in _chunks(len(abc), 1500):
            loc = K.vertex_pair_onesided(V[abc[sl, 0]], V[abc[sl, 1]], V[abc[sl, 2]],
                                         V[ade[sl, 1]], V[ade[sl, 2]], s, nd)
            bc = abc[sl, 1:]
            # boundary vertices would need divergent integrals; they are not DOFs
            loc = loc * (~omega_boundary[bc])[:, :, None] * (~omega_boundary[bc])[:, None, :]
            _accumulate(out, bc, loc)
    return out


def _pair_rule_matrix(P1, P2, s, order):
    """Batch of 3x3 matrices int_T1 int_T2 l_a(x) l_b(y) k by a tensor rule."""
    bary, w = triangle_rule(order)
    x = np.einsum("qk,tkd->tqd", bary, P1)
    y = np.einsum("qk,tkd->tqd", bary, P2)
    a1 = K._area(P1)
    a2 = K._area(P2)
    d2 = np.sum((x[:, :, None, :] - y[:, None, :, :]) ** 2, axis=-1)
    kw = d2 ** (-1.0 - s) * (w[:, None] * w[None, :])[None]
    return np.einsum("qa,tqr,rb->tab", bary, kw, bary) * (a1 * a2)[:, None, None]


def _near_pairs(V, tris, h, radius):
    """Unordered disjoint pairs with minimal vertex distance below ``radius * h``."""
    P = V[tris]
    cen = P.mean(axis=1)
    diam = np.max(np.linalg.norm(P - cen[:, None, :], axis=-1), axis=1).max()
    tree = cKDTree(cen)
    pairs = tree.query_pairs(radius * h + 2 * diam, output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=int), np.zeros(0)
    i, j = pairs[:, 0], pairs[:, 1]
    disjoint = ~(tris[i][:, :, None] == tris[j][:, None, :]).any(axis=(1, 2))
    i, j = i[disjoint], j[disjoint]
    dmin = np.min(np.linalg.norm(P[i][:, :, None, :] - P[j][:, None, :, :], axis=-1), axis=(1, 2))
    keep = dmin < radius * h
    pairs = np.column_stack([np.minimum(i, j), np.maximum(i, j)])[keep]
    dmin = dmin[keep]
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order], dmin[order]


def _cross_part(V, tris, h, s, quad):
    """C: sum over ordered disjoint pairs of int int phi_a(x) phi_b(y) k."""
    n = len(V)
    nT = len(tris)
    out = np.zeros((n, n))
    near, dmin = _near_pairs(V, tris, h, quad.near_ratio)
    # close and near tiers by direct batched rules; both orders of each pair
    for lo, hi, order in ((0.0, quad.close_ratio, quad.close_order),
                          (quad.close_ratio, quad.near_ratio, quad.near_order)):
        sel = (dmin >= lo * h) & (dmin < hi * h)
        pr = near[sel]
        step = max(1, 2_000_000 // triangle_rule(order)[1].size ** 2)
        for sl in _chunks(len(pr), step):
            loc = _pair_rule_matrix(V[tris[pr[sl, 0]]], V[tris[pr[sl, 1]]], s, order)
            rows = tris[pr[sl, 0]]
            cols = tris[pr[sl, 1]]
            r = np.repeat(rows[:, :, None], 3, axis=2).ravel()
            c = np.repeat(cols[:, None, :], 3, axis=1).ravel()
            acc = np.bincount(r * n + c, weights=loc.ravel(), minlength=n * n).reshape(n, n)
            out += acc + acc.T
    # far pairs: one global tensor rule on the kernel matrix, excluded blocks zeroed
    bary, w = triangle_rule(quad.gauss_order_regular)
    nq = len(w)
    P = V[tris]
    x = np.einsum("qk,tkd->tqd", bary, P).reshape(-1, 2)
    wq = (K._area(P)[:, None] * w[None, :]).ravel()
    Phi = sp.csr_matrix((np.tile(bary.ravel(), nT),
                         (np.repeat(tris, nq, axis=0).ravel().reshape(-1), np.repeat(np.arange(nT * nq), 3))),
                        shape=(n, nT * nq))
    # exclusion lists: touching pairs and near pairs, symmetric
    ti, tj, _ = _shared_pairs(tris, tris, n)
    ex_i = np.concatenate([ti, near[:, 0], near[:, 1]])
    ex_j = np.concatenate([tj, near[:, 1], near[:, 0]])
    order = np.argsort(ex_i, kind="stable")
    ex_i, ex_j = ex_i[order], ex_j[order]
    bounds = np.searchsorted(ex_i, np.arange(nT + 1))
    tchunk = max(1, int(2.0e7 // (nT * nq * nq)))
    for t0 in range(0, nT, tchunk):
        t1 = min(nT, t0 + tchunk)
        r0, r1 = t0 * nq, t1 * nq
        c0 = r0
        xr = x[r0:r1]
        xc = x[c0:]
        d2 = (xr[:, None, 0] - xc[None, :, 0]) ** 2
        d2 += (xr[:, None, 1] - xc[None, :, 1]) ** 2
        np.maximum(d2, 1e-100, out=d2)  # excluded blocks, zeroed below
        Kb = np.power(d2, -1.0 - s, out=d2)
        Kb *= wq[r0:r1, None]
        Kb *= wq[None, c0:]
        Kb4 = Kb.reshape(t1 - t0, nq, -1, nq)
        a, b = ex_i[bounds[t0]:bounds[t1]], ex_j[bounds[t0]:bounds[t1]]
        keep = b >= t0
        Kb4[a[keep] - t0, :, b[keep] - t0, :] = 0.0
        Y = (Phi[:, c0:] @ Kb.T).T  # (rows, n)
        blk = Phi[:, r0:r1] @ Y  # (n, n): rows chunk x all later columns
        # diagonal block [t0, t1) x [t0, t1) holds both orders; the rest once
        Yd = (Phi[:, c0:r1] @ Kb[:, :r1 - c0].T).T
        dblk = Phi[:, r0:r1] @ Yd
        off = blk - dblk
        out += dblk + off + off.T
    return out


def _outer_weight_fn(V_all, band, R, s, quad):
    """Correction from the patch formula to the true exterior beyond the band.

    The patch edges already give ``int_{R^2 \\ N(T)} k``; subtracting the outer
    polygon's edge sum leaves ``int_{P_R \\ N(T)} k``, and the circular segments
    plus the radial tail add back ``int_{R^2 \\ P_R} k``.
    """
    be = boundary_edges(band)
    r = np.linalg.norm(V_all[be], axis=-1)
    outer = be[np.all(np.abs(r - R) < 1e-9 * R, axis=1)]
    P, Q = V_all[outer[:, 0]], V_all[outer[:, 1]]

    def fn(x):
        val = np.empty(len(x))
        for sl in _chunks(len(x), 20000):
            xs = x[sl]
            val[sl] = (-K.edge_potential(xs, P, Q, s).sum(axis=1) / (2 * s)
                       + K.sliver_integral(xs, P, Q, R, s, *quad.sliver_points)
                       + K.disc_tail(xs, R, s, quad.tail_order))
        return val
    return fn


def stiffness_raw(mesh, s, quad=None, complement=True):
    """Unscaled matrix ``S + 2 D - 2 C`` on the Omega vertices.

    Returns ``(matrix, omega_vertex_ids)``. With ``complement=False`` only the
    Omega x Omega double integral is assembled; it is valid for all vertices.
    With the complement, rows of boundary vertices are incomplete (their exact
    values diverge) and only the interior block is meaningful.
    """
    quad = quad or QuadratureConfig()
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    omega_ids = np.unique(mesh.triangles)
    inv = np.full(mesh.n_vertices, -1)
    inv[omega_ids] = np.arange(len(omega_ids))
    V = mesh.vertices[omega_ids]
    tris = inv[mesh.triangles]
    h = mesh.h
    t0 = time.perf_counter()
    out = _touching_part(V, tris, s, quad)
    t1 = time.perf_counter()
    out -= 2.0 * _cross_part(V, tris, h, s, quad)
    t2 = time.perf_counter()
    if complement:
        if len(mesh.band_triangles) == 0:
            raise AssemblyError("mesh has no band triangles; the complement term needs them")
        # compact numbering: Omega vertices first, band-only vertices after
        band_only = np.setdiff1d(np.unique(mesh.band_triangles), omega_ids)
        full_inv = inv.copy()
        full_inv[band_only] = len(omega_ids) + np.arange(len(band_only))
        V_all = np.vstack([V, mesh.vertices[band_only]])
        band = full_inv[mesh.band_triangles]
        nv_all = len(V_all)
        patches = _patch_boundaries(np.vstack([tris, band]), tris, nv_all)
        outer_fn = _outer_weight_fn(V_all, band, mesh.band_radius, s, quad)
        out += 2.0 * _weight_part(V_all, tris, patches, outer_fn, s, quad)[:len(V), :len(V)]
        bflag = mesh.boundary_vertex_flags[omega_ids]
        out += 2.0 * _band_touching_part(V_all, tris, band, np.concatenate(
            [bflag, np.ones(len(band_only), dtype=bool)]), s, quad)[:len(V), :len(V)]
    else:
        patches = _patch_boundaries(tris, tris, len(V))
        be = boundary_edges(tris)
        P, Q = V[be[:, 0]], V[be[:, 1]]

        def outer_fn(x):
            return -K.edge_potential(x, P, Q, s).sum(axis=1) / (2 * s)
        out += 2.0 * _weight_part(V, tris, patches, outer_fn, s, quad)
    t3 = time.perf_counter()
    log.info("stiffness pieces: touching %.2fs, cross %.2fs, weight %.2fs", t1 - t0, t2 - t1, t3 - t2)
    return 0.5 * (out + out.T), omega_ids


# ---------------------------------------------------------------------------
# cache


def cache_dir_default():
    return Path(os.environ.get("FRACOCP_CACHE_DIR", Path.home() / ".cache" / "fracocp"))


def _cache_path(cache_dir, mesh, s, quad):
    key = hashlib.sha256(mesh.fingerprint() + struct.pack("<d", s) + quad.digest().encode()).hexdigest()
    return Path(cache_dir) / f"A_{key[:24]}.bin"


def save_matrix(path, A, s, fingerprint, quad):
    n = A.shape[0]
    iu = np.triu_indices(n)
    header = _HEADER.pack(CACHE_MAGIC, 2, float(s), n, fingerprint,
                          quad.gauss_order_regular, quad.duffy_order_singular)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(A[iu], dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_matrix(path, s, fingerprint, quad):
    """Read a cached matrix; returns None if header fields do not match."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        return None
    magic, d, s_file, n, fp, o1, o2 = _HEADER.unpack_from(raw)
    if (magic != CACHE_MAGIC or d != 2 or s_file != s or fp != fingerprint
            or (o1, o2) != (quad.gauss_order_regular, quad.duffy_order_singular)):
        return None
    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if payload.size != n * (n + 1) // 2:
        return None
    A = np.zeros((n, n))
    iu = np.triu_indices(n)
    A[iu] = payload
    A[(iu[1], iu[0])] = payload
    return A


def assemble_fractional_stiffness(mesh, dofmap, s, quad=None, cache_dir=None, check=True):
    """Assemble the OperatorSet; with ``cache_dir`` the stiffness matrix is cached on disk."""
    quad = quad or QuadratureConfig()
    Cds = normalization_constant(2, s)
    fp = mesh.fingerprint()
    A = None
    path = None
    if cache_dir is not None:
        path = _cache_path(cache_dir, mesh, s, quad)
        if path.exists():
            A = load_matrix(path, s, fp, quad)
            if A is not None and A.shape[0] != dofmap.n_dofs:
                A = None
            log.info("cache %s for %s", "hit" if A is not None else "mismatch", path.name)
    if A is None:
        raw, omega_ids = stiffness_raw(mesh, s, quad, complement=True)
        pos = np.searchsorted(omega_ids, dofmap.interior_nodes)
        A = 0.5 * Cds * raw[np.ix_(pos, pos)]
        if path is not None:
            save_matrix(path, A, s, fp, quad)
    if check and A.shape[0] > 0:
        try:
            cho_factor(A)
        except LinAlgError as exc:
            raise AssemblyError("stiffness matrix is not positive definite") from exc
    M = assemble_mass(mesh, dofmap)
    return OperatorSet(A, M, float(s), Cds, fp, basis_integrals(mesh, dofmap),
                       fe_quadrature(mesh, dofmap))
