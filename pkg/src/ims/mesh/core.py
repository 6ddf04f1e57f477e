"""Halfedge triangle mesh with intrinsic edge lengths and DEC operators.

Halfedge ``h = 3*f + c`` runs from corner ``c`` of face ``f`` to corner
``c + 1``.  Edges are stored with the canonical orientation ``i < j``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ..errors import InputError, StructureError, TopologyError


class TriangleMesh:
    """Immutable triangle mesh.

    Parameters
    ----------
    vertices : (V, 3) array
        Vertex positions.  Only used for embedding-dependent operations
        (closest points, output files) once ``edge_lengths`` is given.
    faces : (F, 3) int array
        Counterclockwise vertex triples.
    edge_lengths : (E,) array, optional
        Intrinsic lengths for the canonical edge list.  Computed from
        ``vertices`` when omitted.
    """

    def __init__(self, vertices, faces, edge_lengths=None):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise InputError("vertices must have shape (V, 3), got %s" % (vertices.shape,))
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise InputError("faces must be triangles, got shape %s" % (faces.shape,))
        nv = len(vertices)
        if len(faces) == 0:
            raise InputError("mesh has no faces")
        if faces.min() < 0 or faces.max() >= nv:
            raise InputError("face index out of range [0, %d)" % nv)
        if np.any((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2])
                  | (faces[:, 2] == faces[:, 0])):
            raise StructureError("face with repeated vertex")
        self.vertices = vertices
        self.faces = faces
        self.vertices.setflags(write=False)
        self.faces.setflags(write=False)
        self._build_connectivity()
        if edge_lengths is None:
            d = vertices[self.edges[:, 1]] - vertices[self.edges[:, 0]]
            edge_lengths = np.linalg.norm(d, axis=1)
        edge_lengths = np.asarray(edge_lengths, dtype=float)
        if edge_lengths.shape != (self.n_edges,):
            raise InputError("expected %d edge lengths, got %s" % (self.n_edges, edge_lengths.shape))
        self.edge_lengths = edge_lengths
        self.edge_lengths.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces

    @property
    def is_closed(self):
        return len(self.boundary_loops) == 0

    def _build_connectivity(self):
        F = self.faces
        nv = len(self.vertices)
        tail = F.ravel()
        head = F[:, [1, 2, 0]].ravel()
        key = tail * nv + head
        order = np.argsort(key, kind="stable")
        skey = key[order]
        if np.any(skey[1:] == skey[:-1]):
            bad = skey[1:][skey[1:] == skey[:-1]][0]
            raise StructureError(
                "halfedge %d->%d appears twice (non-manifold edge or inconsistent orientation)"
                % (bad // nv, bad % nv))
        rkey = head * nv + tail
        pos = np.searchsorted(skey, rkey)
        pos = np.minimum(pos, len(skey) - 1)
        found = skey[pos] == rkey
        twin = np.where(found, order[pos], -1)

        lo = np.minimum(tail, head)
        hi = np.maximum(tail, head)
        ekey = lo * nv + hi
        ukeys, he_edge = np.unique(ekey, return_inverse=True)
        self.edges = np.stack([ukeys // nv, ukeys % nv], axis=1)
        self.he_tail = tail
        self.he_head = head
        self.he_twin = twin
        self.he_edge = he_edge.ravel()
        self.he_sign = np.where(tail < head, 1, -1)
        # one representative halfedge per edge, the one pointing along the canonical orientation when it exists
        ne = len(ukeys)
        rep = np.full(ne, -1, dtype=np.int64)
        pos_he = np.flatnonzero(self.he_sign > 0)
        rep[self.he_edge[pos_he]] = pos_he
        neg_he = np.flatnonzero(self.he_sign < 0)
        missing = rep[self.he_edge[neg_he]] < 0
        rep[self.he_edge[neg_he[missing]]] = neg_he[missing]
        self.edge_halfedge = rep
        for a in (self.edges, self.he_tail, self.he_head, self.he_twin, self.he_edge, self.he_sign):
            a.setflags(write=False)

        used = np.zeros(nv, dtype=bool)
        used[tail] = True
        if not used.all():
            raise StructureError("%d isolated vertices" % int((~used).sum()))
        self._check_vertex_fans()
        self.boundary_loops = self._trace_boundary()
        self._check_connected()

    def next_he(self, h):
        return h - h % 3 + (h + 1) % 3

    def prev_he(self, h):
        return h - h % 3 + (h + 2) % 3

    def _check_vertex_fans(self):
        # each vertex must have a single fan of faces (no bow ties)
        nv = len(self.vertices)
        nh = len(self.he_tail)
        h = np.arange(nh)
        nxt = self.he_twin[self.prev_he(h)]
        # start fans at halfedges with no ccw predecessor (boundary) or lowest index
        has_pred = np.zeros(nh, dtype=bool)
        has_pred[nxt[nxt >= 0]] = True
        seen = np.zeros(nh, dtype=bool)
        fans = np.zeros(nv, dtype=np.int64)
        starts = list(np.flatnonzero(~has_pred))
        for s in starts + list(range(nh)):
            if seen[s]:
                continue
            fans[self.he_tail[s]] += 1
            cur = s
            while cur >= 0 and not seen[cur]:
                seen[cur] = True
                cur = nxt[cur]
        bad = np.flatnonzero(fans > 1)
        if len(bad):
            raise StructureError("non-manifold vertex %d (%d separate fans)" % (bad[0], fans[bad[0]]))

    def _trace_boundary(self):
        bh = np.flatnonzero(self.he_twin < 0)
        if len(bh) == 0:
            return []
        # boundary halfedges i->j; loops follow the reversed direction j->i of the missing twins
        nxt_of = {}
        for h in bh:
            t = int(self.he_tail[h])
            if t in nxt_of:
                raise StructureError("vertex %d is on two boundary loops" % t)
            nxt_of[t] = int(self.he_head[h])
        loops = []
        visited = set()
        for h in bh:
            start = int(self.he_tail[h])
            if start in visited:
                continue
            loop = []
            cur = start
            while cur not in visited:
                visited.add(cur)
                loop.append(cur)
                cur = nxt_of[cur]
            loops.append(np.array(loop, dtype=np.int64))
        return loops

    def _check_connected(self):
        nf = self.n_faces
        h = np.flatnonzero(self.he_twin >= 0)
        adj = sp.csr_matrix((np.ones(len(h)), (h // 3, self.he_twin[h] // 3)), shape=(nf, nf))
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp != 1:
            raise StructureError("mesh has %d connected components" % ncomp)

    # --- intrinsic quantities -------------------------------------------------

    @cached_property
    def halfedge_lengths(self):
        """(F, 3) lengths; entry (f, c) is the edge from corner c to c+1."""
        return self.edge_lengths[self.he_edge].reshape(-1, 3)

    def check_triangle_inequality(self, rtol=1e-12):
        """Indices of faces whose lengths violate the strict triangle inequality."""
        l = self.halfedge_lengths
        s = l.sum(axis=1)
        slack = s - 2 * l.max(axis=1)
        return np.flatnonzero(slack <= rtol * s)

    @cached_property
    def geometry(self):
        return IntrinsicGeometry.from_mesh(self)

    def vertex_face_adjacency(self):
        nf = self.n_faces
        return sp.csr_matrix((np.ones(3 * nf), (self.faces.ravel(), np.repeat(np.arange(nf), 3))),
                             shape=(self.n_vertices, nf))

    def require_closed_sphere(self):
        chi = self.euler_characteristic
        if not self.is_closed:
            raise TopologyError("mesh has %d boundary loops; fill them first" % len(self.boundary_loops), chi)
        if chi != 2:
            raise TopologyError("mesh is not genus zero (Euler characteristic %d)" % chi, chi)

    def mean_edge_length(self):
        return float(self.edge_lengths.mean())


def _corner_angles(l):
    """Corner angles from (F, 3) halfedge lengths (angle at corner c)."""
    a = l                          # c -> c+1
    b = np.roll(l, 1, axis=1)      # c-1 -> c, i.e. c+2 -> c
    o = np.roll(l, -1, axis=1)     # opposite edge c+1 -> c+2
    cos = (a * a + b * b - o * o) / (2 * a * b)
    return np.arccos(np.clip(cos, -1.0, 1.0))


def _face_areas(l):
    # Kahan's numerically stable Heron formula
    s = np.sort(l, axis=1)[:, ::-1]
    a, b, c = s[:, 0], s[:, 1], s[:, 2]
    p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * np.sqrt(np.maximum(p, 0.0))


def halfedge_angles(mesh, corner_angles):
    """Polar angle of each outgoing halfedge around its tail vertex.

    Angles are accumulated counterclockwise from a reference halfedge per
    vertex (the outgoing boundary halfedge on boundary vertices, otherwise the
    lowest-index outgoing halfedge), using ``corner_angles`` (F, 3).
    """
    nv = mesh.n_vertices
    nh = 3 * mesh.n_faces
    h = np.arange(nh)
    ccw = mesh.he_twin[mesh.prev_he(h)]
    ref = np.full(nv, nh, dtype=np.int64)
    np.minimum.at(ref, mesh.he_tail, h)
    # boundary vertices: reference is the halfedge with no clockwise neighbour
    bnd = np.flatnonzero(mesh.he_twin < 0)
    ref[mesh.he_tail[bnd]] = bnd
    ang = np.full(nh, np.nan)
    ang[ref] = 0.0
    theta = corner_angles.ravel()
    cur = ref.copy()
    active = np.ones(nv, dtype=bool)
    while active.any():
        c = cur[active]
        n = ccw[c]
        ok = (n >= 0) & (n != ref[active])
        idx = np.flatnonzero(active)
        ang[n[ok]] = ang[c[ok]] + theta[c[ok]]
        cur[idx[ok]] = n[ok]
        active[idx[~ok]] = False
    return ang


@dataclass
class IntrinsicGeometry:
    """Angle, area and DEC data derived from a mesh's edge lengths."""

    mesh: TriangleMesh
    corner_angles: np.ndarray
    angle_sums: np.ndarray
    rescaled_angles: np.ndarray
    he_angle: np.ndarray
    halfedge_directions: np.ndarray
    face_areas: np.ndarray
    cot_weights: np.ndarray
    lumped_mass: np.ndarray
    dec_d1: sp.csr_matrix

    @classmethod
    def from_mesh(cls, mesh):
        l = mesh.halfedge_lengths
        bad = mesh.check_triangle_inequality()
        if len(bad):
            raise StructureError("triangle inequality violated in face %d" % bad[0])
        theta = _corner_angles(l)
        nv = mesh.n_vertices
        sums = np.bincount(mesh.faces.ravel(), theta.ravel(), minlength=nv)
        scale = 2 * np.pi / sums
        if not mesh.is_closed:
            bverts = np.concatenate(mesh.boundary_loops)
            scale[bverts] = 1.0
        rescaled = theta * scale[mesh.faces]
        ang = halfedge_angles(mesh, rescaled)
        areas = _face_areas(l)
        if np.any(areas <= 0):
            raise StructureError("degenerate face %d" % np.flatnonzero(areas <= 0)[0])
        # cot of the angle opposite halfedge 3f+c sits at corner c+2
        cot = 1.0 / np.tan(np.roll(theta, -2, axis=1))
        w = 0.5 * np.bincount(mesh.he_edge, cot.ravel(), minlength=mesh.n_edges)
        mass = np.bincount(mesh.faces.ravel(), np.repeat(areas / 3, 3), minlength=nv)
        nh = 3 * mesh.n_faces
        d1 = sp.csr_matrix((mesh.he_sign.astype(float), (np.arange(nh) // 3, mesh.he_edge)),
                           shape=(mesh.n_faces, mesh.n_edges))
        return cls(mesh=mesh, corner_angles=theta, angle_sums=sums, rescaled_angles=rescaled,
                   he_angle=ang, halfedge_directions=np.exp(1j * ang), face_areas=areas,
                   cot_weights=w, lumped_mass=mass, dec_d1=d1)

    @property
    def total_area(self):
        return float(self.face_areas.sum())

    def hodge_star1(self, floor=1e-3):
        """Cotan weights clamped below at ``floor`` times their mean magnitude.

        Non-Delaunay or cocircular configurations give zero or negative
        weights, which would make the dual Poisson problems indefinite.
        """
        w = self.cot_weights
        return np.maximum(w, floor * np.abs(w).mean())

    def cotan_laplacian(self):
        """Positive semidefinite cotangent Laplacian."""
        m = self.mesh
        i, j = m.edges[:, 0], m.edges[:, 1]
        w = self.cot_weights
        n = m.n_vertices
        L = sp.csr_matrix((np.concatenate([-w, -w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                          shape=(n, n))
        return (L - sp.diags(np.asarray(L.sum(axis=1)).ravel())).tocsr()

    def galerkin_mass(self):
        m = self.mesh
        a = self.face_areas
        F = m.faces
        rows = np.concatenate([F[:, [0, 1, 2, 0, 1, 2, 0, 1, 2]].ravel()])
        cols = np.concatenate([F[:, [0, 1, 2, 1, 2, 0, 2, 0, 1]].ravel()])
        vals = np.repeat(a / 12, 9).reshape(-1, 9)
        vals[:, :3] *= 2
        return sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(m.n_vertices, m.n_vertices))

    def layout_faces(self):
        """Planar (F, 3, 2) coordinates of each face: corner 0 at origin, corner 1 on +x."""
        l = self.mesh.halfedge_lengths
        th = self.corner_angles[:, 0]
        P = np.zeros((self.mesh.n_faces, 3, 2))
        P[:, 1, 0] = l[:, 0]
        P[:, 2, 0] = l[:, 2] * np.cos(th)
        P[:, 2, 1] = l[:, 2] * np.sin(th)
        return P

    def gauss_bonnet_residual(self):
        """|sum over faces of (rescaled angle sum - pi) - 2 pi chi|, closed meshes."""
        k = self.rescaled_angles.sum(axis=1) - np.pi
        return abs(k.sum() - 2 * np.pi * self.mesh.euler_characteristic)
