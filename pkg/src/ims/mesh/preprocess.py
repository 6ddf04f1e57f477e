"""Boundary filling and intrinsic Delaunay flips with signpost bookkeeping."""

import numpy as np

from ..errors import InputError, NumericalError, TopologyError
from .core import TriangleMesh, halfedge_angles


def fill_boundaries(mesh):
    """Cap every boundary loop with a triangle fan around its centroid.

    Returns ``(filled, filled_faces, boundary_curves)``.  The curves are the
    original boundary cycles (closed chains, first vertex repeated at the end).
    """
    if mesh.is_closed:
        return mesh, np.zeros(0, dtype=np.int64), []
    V = [mesh.vertices]
    F = [mesh.faces]
    nv = mesh.n_vertices
    curves = []
    new_faces = []
    nf = mesh.n_faces
    for loop in mesh.boundary_loops:
        if len(loop) < 3:
            raise InputError("degenerate boundary loop with %d vertices" % len(loop))
        apex = nv
        nv += 1
        V.append(mesh.vertices[loop].mean(axis=0, keepdims=True))
        # loop follows boundary halfedges i->j; the cap uses the reversed orientation
        fan = np.stack([np.roll(loop, -1), loop, np.full(len(loop), apex)], axis=1)
        F.append(fan)
        new_faces.append(np.arange(nf, nf + len(loop)))
        nf += len(loop)
        curves.append(np.append(loop, loop[0]))
    V = np.concatenate(V)
    Fa = np.concatenate(F)
    # keep intrinsic lengths of existing edges; new edges get embedded lengths
    filled = TriangleMesh(V, Fa)
    old = dict(zip(map(tuple, mesh.edges), mesh.edge_lengths))
    lengths = np.array([old.get(tuple(e), l) for e, l in zip(filled.edges, filled.edge_lengths)])
    filled = TriangleMesh(V, Fa, lengths)
    if filled.euler_characteristic != 2:
        raise TopologyError("surface is not a sphere after filling (Euler characteristic %d)"
                            % filled.euler_characteristic, filled.euler_characteristic)
    return filled, np.concatenate(new_faces), curves


class IntrinsicMesh(TriangleMesh):
    """Intrinsic triangulation over the vertices of ``original``.

    ``signposts[h]`` is the direction of halfedge ``h`` at its tail, measured
    in the original mesh's (unrescaled) angle coordinate at that vertex.
    """

    def __init__(self, vertices, faces, edge_lengths, original, signposts, n_flips):
        super().__init__(vertices, faces, edge_lengths)
        self.original = original
        self.signposts = signposts
        self.n_flips = n_flips

    def to_original(self, faces, bary):
        """Map points given on intrinsic faces to (face, barycentric) on the original mesh."""
        if self.n_flips == 0:
            return np.asarray(faces), np.asarray(bary, dtype=float)
        src = _Tracer(self, self.signposts)
        dst = _Tracer(self.original, _original_signposts(self.original))
        return _transfer(src, dst, faces, bary)

    def from_original(self, faces, bary):
        if self.n_flips == 0:
            return np.asarray(faces), np.asarray(bary, dtype=float)
        src = _Tracer(self.original, _original_signposts(self.original))
        dst = _Tracer(self, self.signposts)
        return _transfer(src, dst, faces, bary)

    def embed(self, faces, bary):
        """3D positions of intrinsic points (via the original faces)."""
        f, b = self.to_original(faces, bary)
        return np.einsum("ij,ijk->ik", b, self.original.vertices[self.original.faces[f]])


def _original_signposts(mesh):
    return halfedge_angles(mesh, mesh.geometry.corner_angles)


def intrinsic_delaunay(mesh, tol=1e-12):
    """Flip edges until every interior edge is locally Delaunay.

    Returns an :class:`IntrinsicMesh` sharing the vertex set of ``mesh``.
    Flips that would create a self-edge or a duplicate edge are skipped.
    """
    geom = mesh.geometry
    faces = mesh.faces.copy()
    lens = mesh.halfedge_lengths.copy().ravel()
    twin = mesh.he_twin.copy()
    sign = _original_signposts(mesh).copy()
    theta_sum = geom.angle_sums
    nv = mesh.n_vertices
    # adjacency sets for duplicate-edge detection
    nbrs = [set() for _ in range(nv)]
    for a, b in mesh.edges:
        nbrs[a].add(b)
        nbrs[b].add(a)

    def corner(h):
        # angle at the tail of halfedge h inside its face
        f, c = divmod(h, 3)
        a = lens[3 * f + c]
        b = lens[3 * f + (c + 2) % 3]
        o = lens[3 * f + (c + 1) % 3]
        return np.arccos(np.clip((a * a + b * b - o * o) / (2 * a * b), -1, 1))

    def opposite(h):
        # angle opposite halfedge h in its face
        f, c = divmod(h, 3)
        return corner(3 * f + (c + 2) % 3)

    stack = list(np.flatnonzero((twin >= 0) & (np.arange(len(twin)) < twin)))
    n_flips = 0
    max_flips = 100 * mesh.n_edges
    while stack:
        h = int(stack.pop())
        t = int(twin[h])
        if t < 0:
            continue
        if opposite(h) + opposite(t) <= np.pi + tol:
            continue
        fa, ca = divmod(h, 3)
        fb, cb = divmod(t, 3)
        i, j, k = faces[fa, ca], faces[fa, (ca + 1) % 3], faces[fa, (ca + 2) % 3]
        l = faces[fb, (cb + 2) % 3]
        if k == l or l in nbrs[k]:
            continue
        a1, a2 = 3 * fa + (ca + 1) % 3, 3 * fa + (ca + 2) % 3   # j->k, k->i
        b1, b2 = 3 * fb + (cb + 1) % 3, 3 * fb + (cb + 2) % 3   # i->l, l->j
        # new diagonal length from a planar layout of the quad
        ti = corner(h) + corner(b1)
        lik, lil = lens[a2], lens[b1]
        lkl = np.sqrt(max(lik * lik + lil * lil - 2 * lik * lil * np.cos(ti), 0.0))
        old = {name: (lens[x], sign[x], twin[x]) for name, x in
               (("lj", b2), ("jk", a1), ("ki", a2), ("il", b1))}
        faces[fa] = [l, j, k]
        faces[fb] = [k, i, l]
        new = {"lj": 3 * fa, "jk": 3 * fa + 1, "ki": 3 * fb, "il": 3 * fb + 1}
        for name, x in new.items():
            lens[x], sign[x], tw = old[name]
            twin[x] = tw
            if tw >= 0:
                twin[tw] = x
        d1, d2 = 3 * fa + 2, 3 * fb + 2     # k->l, l->k
        lens[d1] = lens[d2] = lkl
        twin[d1], twin[d2] = d2, d1
        sign[d1] = (sign[new["ki"]] + corner(new["ki"])) % theta_sum[k]
        sign[d2] = (sign[new["lj"]] + corner(new["lj"])) % theta_sum[l]
        nbrs[i].discard(j)
        nbrs[j].discard(i)
        nbrs[k].add(l)
        nbrs[l].add(k)
        n_flips += 1
        if n_flips > max_flips:
            raise NumericalError("intrinsic Delaunay flips did not converge after %d flips" % n_flips)
        stack.extend(new.values())
    if n_flips == 0:
        return IntrinsicMesh(mesh.vertices, mesh.faces, mesh.edge_lengths, mesh, sign, 0)
    tmp = TriangleMesh(mesh.vertices, faces)
    el = np.empty(tmp.n_edges)
    el[tmp.he_edge] = lens
    return IntrinsicMesh(mesh.vertices, faces, el, mesh, sign, n_flips)


# --- tracing straight lines over a triangulation -----------------------------

class _Tracer:
    def __init__(self, mesh, signposts):
        self.mesh = mesh
        self.l = mesh.halfedge_lengths
        self.theta = mesh.geometry.corner_angles
        self.sign = signposts
        order = np.argsort(mesh.he_tail, kind="stable")
        self.out = order
        self.out_ptr = np.searchsorted(mesh.he_tail[order], np.arange(mesh.n_vertices + 1))

    def layout(self, f):
        """2D corners of face f with corner 0 at the origin and corner 1 on +x."""
        l = self.l[f]
        th = self.theta[f, 0]
        return np.array([[0.0, 0.0], [l[0], 0.0], [l[2] * np.cos(th), l[2] * np.sin(th)]])

    def direction(self, f, bary, c):
        """(angle, distance) of the point ``bary`` in face f as seen from corner c."""
        P = self.layout(f)
        h = 3 * f + c
        p = bary @ P - P[c]
        e = P[(c + 1) % 3] - P[c]
        ang = np.arctan2(e[0] * p[1] - e[1] * p[0], e @ p)
        return self.sign[h] + ang, np.hypot(*p)

    def trace(self, v, angle, dist):
        m = self.mesh
        hs = self.out[self.out_ptr[v]:self.out_ptr[v + 1]]
        total = m.geometry.angle_sums[v]
        angle = angle % total
        rel = (angle - self.sign[hs]) % total
        h = int(hs[np.argmin(rel)])
        delta = rel.min()
        f, c = divmod(h, 3)
        P = self.layout(f)
        e = P[(c + 1) % 3] - P[c]
        e = e / np.linalg.norm(e)
        rot = np.array([e[0] * np.cos(delta) - e[1] * np.sin(delta), e[0] * np.sin(delta) + e[1] * np.cos(delta)])
        return self._walk(f, P, P[c].copy(), rot, dist)

    def _walk(self, f, P, s, u, dist):
        m = self.mesh
        for _ in range(100000):
            q = s + dist * u
            b = _bary2d(P, q)
            if b.min() >= -1e-12:
                b = np.clip(b, 0, None)
                return f, b / b.sum()
            best, bt = -1, -np.inf
            for a in range(3):
                pa, pb = P[a], P[(a + 1) % 3]
                d = pb - pa
                den = u[0] * d[1] - u[1] * d[0]
                if abs(den) < 1e-300:
                    continue
                w = pa - s
                t = (w[0] * d[1] - w[1] * d[0]) / den
                mu = (w[0] * u[1] - w[1] * u[0]) / den
                if -1e-12 <= mu <= 1 + 1e-12 and t > bt:
                    best, bt = a, t
            if best < 0 or bt <= 0:
                # numerically stuck on a vertex; return the closest point in this face
                b = np.clip(b, 0, None)
                return f, b / b.sum()
            he = 3 * f + best
            tw = m.he_twin[he]
            if tw < 0:
                b = np.clip(_bary2d(P, s + bt * u), 0, None)
                return f, b / b.sum()
            pa, pb = P[best], P[(best + 1) % 3]
            g, cg = divmod(int(tw), 3)
            lg = self.l[g]
            l1 = lg[(cg + 1) % 3]     # from corner cg+1 (=pa) to cg+2
            l2 = lg[(cg + 2) % 3]     # from cg+2 to cg (=pb)
            x = _third_point(pb, pa, l2, l1)
            Q = np.empty((3, 2))
            Q[cg], Q[(cg + 1) % 3], Q[(cg + 2) % 3] = pb, pa, x
            s = s + bt * u
            dist -= bt
            f, P = g, Q
        raise NumericalError("surface trace did not terminate")


def _bary2d(P, q):
    a, b, c = P
    det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    l1 = ((q[0] - a[0]) * (c[1] - a[1]) - (q[1] - a[1]) * (c[0] - a[0])) / det
    l2 = ((b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0])) / det
    return np.array([1 - l1 - l2, l1, l2])


def _third_point(p, q, lp, lq):
    """Point x left of p->q with |x - p| = lp and |x - q| = lq."""
    d = q - p
    L = np.hypot(*d)
    a = (lp * lp - lq * lq + L * L) / (2 * L)
    h = np.sqrt(max(lp * lp - a * a, 0.0))
    e = d / L
    return p + a * e + h * np.array([-e[1], e[0]])


def _transfer(src, dst, faces, bary):
    faces = np.atleast_1d(np.asarray(faces))
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    out_f = np.empty(len(faces), dtype=np.int64)
    out_b = np.empty((len(faces), 3))
    for n, (f, b) in enumerate(zip(faces, bary)):
        c = int(np.argmax(b))
        v = src.mesh.faces[f, c]
        if b[c] >= 1 - 1e-14:
            # vertex: any incident face of the destination with a corner there
            h = dst.out[dst.out_ptr[v]]
            g, cg = divmod(int(h), 3)
            out_f[n] = g
            out_b[n] = 0
            out_b[n, cg] = 1
            continue
        ang, dist = src.direction(f, b, c)
        out_f[n], out_b[n] = dst.trace(v, ang, dist)
    return out_f, out_b
