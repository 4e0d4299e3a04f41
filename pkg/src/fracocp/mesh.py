"""Conforming triangulations of the unit disc with an exterior band.

The Omega part is an inscribed polygon refined by quadrisection; midpoints of
boundary edges are pushed radially onto the unit circle. A band of triangles
covers the annulus between the polygon and an outer polygon inscribed in the
circle of radius ``R``; it is rebuilt after every refinement so that it always
conforms with the current boundary edges.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

MAX_DOFS = 5000
MAX_TRIANGLES = 20000

BOUNDARY_TOL = 1e-12


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangulation of Omega plus band triangles covering ``B(0, R) \\ Omega``.

    ``vertices`` holds Omega vertices first, then band-only vertices.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex_flags: np.ndarray
    band_triangles: np.ndarray
    band_radius: float = 2.0
    level: int = 0
    domain: str = "disc"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_vertex_flags", "band_triangles"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def h(self):
        return float(self.diameters.max())

    @property
    def diameters(self):
        if "diam" not in self._cache:
            p = self.vertices[self.triangles]
            e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
            self._cache["diam"] = np.linalg.norm(e, axis=2).max(axis=1)
        return self._cache["diam"]

    @property
    def areas(self):
        if "areas" not in self._cache:
            self._cache["areas"] = signed_areas(self.vertices, self.triangles)
        return self._cache["areas"]

    @property
    def omega_vertex_ids(self):
        return np.unique(self.triangles)

    def fingerprint(self):
        """SHA-256 digest (32 bytes) of the geometry and connectivity."""
        if "fp" not in self._cache:
            h = hashlib.sha256()
            h.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
            h.update(np.ascontiguousarray(self.triangles, dtype="<i8").tobytes())
            h.update(np.ascontiguousarray(self.band_triangles, dtype="<i8").tobytes())
            h.update(np.ascontiguousarray(self.boundary_vertex_flags, dtype="u1").tobytes())
            self._cache["fp"] = h.digest()
        return self._cache["fp"]


@dataclass(frozen=True)
class DofMap:
    interior_nodes: np.ndarray
    node_to_dof: np.ndarray

    @property
    def n_dofs(self):
        return len(self.interior_nodes)


def signed_areas(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def edge_incidence(triangles):
    """Map each undirected edge ``(i, j), i < j`` to its number of triangles."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e.sort(axis=1)
    edges, counts = np.unique(e, axis=0, return_counts=True)
    return edges, counts


def boundary_edges(triangles):
    """Oriented boundary edges (counterclockwise around the triangulated region)."""
    directed = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return directed[counts[inv.ravel()] == 1]


def _fan(n=6):
    ang = 2.0 * np.pi * np.arange(n) / n
    verts = np.vstack([[0.0, 0.0], np.column_stack([np.cos(ang), np.sin(ang)])])
    tris = np.array([[0, 1 + k, 1 + (k + 1) % n] for k in range(n)])
    return verts, tris


def _refine_arrays(vertices, triangles, snap):
    edges, counts = edge_incidence(triangles)
    nv = len(vertices)
    mids = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    on_boundary = counts == 1
    if snap:
        r = np.linalg.norm(mids[on_boundary], axis=1)
        mids[on_boundary] /= r[:, None]
    new_vertices = np.vstack([vertices, mids])
    # edge lookup via a dense key
    key = edges[:, 0] * nv + edges[:, 1]
    order = np.argsort(key)
    skey = key[order]

    def mid_index(a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        pos = np.searchsorted(skey, lo * nv + hi)
        return nv + order[pos]

    a, b, c = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    ab, bc, ca = mid_index(a, b), mid_index(b, c), mid_index(c, a)
    new_tris = np.concatenate([
        np.column_stack([a, ab, ca]),
        np.column_stack([ab, b, bc]),
        np.column_stack([ca, bc, c]),
        np.column_stack([ab, bc, ca]),
    ])
    # keep children of one parent adjacent
    n = len(triangles)
    perm = np.arange(4 * n).reshape(4, n).T.ravel()
    return new_vertices, new_tris[perm]


def _boundary_loop(triangles):
    """Boundary vertex ids in counterclockwise order."""
    be = boundary_edges(triangles)
    nxt = dict(zip(be[:, 0].tolist(), be[:, 1].tolist()))
    start = int(be[0, 0])
    loop = [start]
    v = nxt[start]
    while v != start:
        loop.append(v)
        v = nxt[v]
        if len(loop) > len(be):
            raise MeshError("boundary is not a single closed loop")
    return np.array(loop)


def build_band(vertices, triangles, band_radius):
    """Layered annulus triangulation between the boundary loop and radius R.

    Returns ``(extra_vertices, band_triangles)`` where band triangle indices
    refer to the concatenation of ``vertices`` and ``extra_vertices``.
    """
    loop = _boundary_loop(triangles)
    inner = vertices[loop]
    n = len(loop)
    rad = np.linalg.norm(inner, axis=1)
    if np.any(rad >= band_radius):
        raise MeshError("band radius must exceed the boundary radius")
    dirs = inner / rad[:, None]
    # geometric layers with radial spacing comparable to the tangential one
    step = 2.0 * np.pi / n
    n_layers = max(1, int(np.ceil(np.log(band_radius / rad.min()) / np.log1p(step))))
    t = np.arange(1, n_layers + 1) / n_layers
    extra = []
    rings = [loop]
    nv = len(vertices)
    for tk in t:
        r = rad * (band_radius / rad) ** tk
        ids = nv + len(extra) * n + np.arange(n)
        extra.append(dirs * r[:, None])
        rings.append(ids)
    tris = []
    for inner_ids, outer_ids in zip(rings[:-1], rings[1:]):
        i0, i1 = inner_ids, np.roll(inner_ids, -1)
        o0, o1 = outer_ids, np.roll(outer_ids, -1)
        tris.append(np.column_stack([i0, o1, o0]))
        tris.append(np.column_stack([i0, i1, o1]))
    extra_vertices = np.vstack(extra) if extra else np.zeros((0, 2))
    band = np.vstack(tris)
    # orient counterclockwise
    allv = np.vstack([vertices, extra_vertices])
    neg = signed_areas(allv, band) < 0
    band[neg] = band[neg][:, [0, 2, 1]]
    return extra_vertices, band


def _assemble_mesh(vertices, triangles, band_radius, level, domain):
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    neg = signed_areas(vertices, triangles) < 0
    triangles = triangles.copy()
    triangles[neg] = triangles[neg][:, [0, 2, 1]]
    be = boundary_edges(triangles)
    flags = np.zeros(len(vertices), dtype=bool)
    flags[be.ravel()] = True
    if band_radius is None:
        extra, band = np.zeros((0, 2)), np.zeros((0, 3), dtype=np.int64)
    else:
        extra, band = build_band(vertices, triangles, band_radius)
    all_vertices = np.vstack([vertices, extra])
    all_flags = np.concatenate([flags, np.zeros(len(extra), dtype=bool)])
    radius = float("nan") if band_radius is None else float(band_radius)
    return TriMesh(all_vertices, triangles, all_flags, band, radius, int(level), domain)


def _check_resources(n_triangles, n_dofs):
    if n_triangles > MAX_TRIANGLES or n_dofs > MAX_DOFS:
        raise MeshError(
            f"mesh with {n_triangles} triangles / {n_dofs} dofs exceeds the resource guard "
            f"({MAX_TRIANGLES} triangles, {MAX_DOFS} dofs)")


def make_disc_mesh(level, band_radius=2.0):
    """Fan triangulation of the unit disc refined ``level`` times."""
    if level < 0:
        raise MeshError("level must be nonnegative")
    if band_radius <= 1.0:
        raise MeshError("band radius must be > 1")
    # fan: 6 * 4^k triangles, 1 + 3 * 2^k * (2^k - 1) interior vertices
    k = 2 ** level
    _check_resources(6 * k * k, 1 + 3 * k * (k - 1))
    verts, tris = _fan(6)
    for _ in range(level):
        verts, tris = _refine_arrays(verts, tris, snap=True)
    return _assemble_mesh(verts, tris, band_radius, level, "disc")


def mesh_from_arrays(vertices, triangles, band_radius=2.0, level=0):
    """Mesh of a general polygon; no boundary snapping.

    The band needs the polygon to be star-shaped about the origin. Pass
    ``band_radius=None`` to build a mesh without band.
    """
    return _assemble_mesh(vertices, triangles, band_radius, level, "polygon")


def refine(mesh):
    """Uniform quadrisection; disc meshes snap new boundary vertices to the circle."""
    n_omega = int(mesh.triangles.max()) + 1
    verts = np.asarray(mesh.vertices[:n_omega])
    n_new_tri = 4 * mesh.n_triangles
    _check_resources(n_new_tri, 0)
    verts, tris = _refine_arrays(verts, np.asarray(mesh.triangles), snap=mesh.domain == "disc")
    radius = mesh.band_radius if len(mesh.band_triangles) else None
    return _assemble_mesh(verts, tris, radius, mesh.level + 1, mesh.domain)


def build_dofmap(mesh):
    omega = mesh.omega_vertex_ids
    interior = omega[~mesh.boundary_vertex_flags[omega]]
    node_to_dof = np.full(mesh.n_vertices, -1, dtype=np.int64)
    node_to_dof[interior] = np.arange(len(interior))
    _check_resources(0, len(interior))
    return DofMap(interior, node_to_dof)


def audit(mesh):
    """Return a dict of structural checks (all should be True)."""
    _, counts = edge_incidence(mesh.triangles)
    all_tris = np.vstack([mesh.triangles, mesh.band_triangles])
    _, all_counts = edge_incidence(all_tris)
    bverts = np.where(mesh.boundary_vertex_flags)[0]
    out = {
        "omega_conforming": bool(np.all((counts == 1) | (counts == 2))),
        "band_conforming": bool(np.all((all_counts == 1) | (all_counts == 2))),
        "positive_areas": bool(signed_areas(mesh.vertices, mesh.triangles).min() > 0
                               and np.all(signed_areas(mesh.vertices, mesh.band_triangles) > 0)),
    }
    if mesh.domain == "disc":
        r = np.linalg.norm(mesh.vertices[bverts], axis=1)
        out["boundary_snapped"] = bool(np.max(np.abs(r - 1.0)) <= BOUNDARY_TOL)
    return out


def save_mesh(mesh, path):
    """Plain-text export: ``nv nt nb`` then vertex lines, then triangle lines."""
    lines = [f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.band_triangles)}"]
    for (x, y), f in zip(mesh.vertices, mesh.boundary_vertex_flags):
        lines.append(f"{x:.17g} {y:.17g} {int(f)}")
    for t in mesh.triangles:
        lines.append(f"{t[0]} {t[1]} {t[2]} omega")
    for t in mesh.band_triangles:
        lines.append(f"{t[0]} {t[1]} {t[2]} band")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path, band_radius=None, level=0, domain="disc"):
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip()]
    nv, nt, nb = (int(v) for v in rows[0])
    vrows = rows[1:1 + nv]
    verts = np.array([[float(r[0]), float(r[1])] for r in vrows])
    flags = np.array([bool(int(r[2])) for r in vrows])
    omega, band = [], []
    for r in rows[1 + nv:1 + nv + nt + nb]:
        tri = [int(r[0]), int(r[1]), int(r[2])]
        if r[3] == "omega":
            omega.append(tri)
        elif r[3] == "band":
            band.append(tri)
        else:
            raise MeshError(f"unknown region {r[3]!r}")
    if len(omega) != nt or len(band) != nb:
        raise MeshError("triangle counts do not match the header")
    band = np.array(band, dtype=np.int64).reshape(-1, 3)
    if band_radius is None:
        band_radius = float(np.linalg.norm(verts, axis=1).max()) if nb else 2.0
    return TriMesh(verts, np.array(omega, dtype=np.int64), flags, band,
                   float(band_radius), level, domain)
