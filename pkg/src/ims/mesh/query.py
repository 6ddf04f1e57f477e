"""Closest-point queries on embedded meshes."""

import numpy as np
from scipy.spatial import cKDTree


def point_triangle(p, a, b, c):
    """Closest points of p on triangles (a, b, c), vectorized over rows.

    Returns ``(distance, barycentric)`` with barycentric of shape (N, 3).
    Region tests follow the standard Voronoi-region case analysis.
    """
    p, a, b, c = (np.atleast_2d(x).astype(float) for x in (p, a, b, c))
    n = max(len(p), len(a))
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    bary = np.zeros((n, 3))
    done = np.zeros(n, dtype=bool)

    def put(mask, u, v, w):
        m = mask & ~done
        bary[m, 0] = u[m] if np.ndim(u) else u
        bary[m, 1] = v[m] if np.ndim(v) else v
        bary[m, 2] = w[m] if np.ndim(w) else w
        done[m] = True

    with np.errstate(divide="ignore", invalid="ignore"):
        put((d1 <= 0) & (d2 <= 0), 1.0, 0.0, 0.0)
        put((d3 >= 0) & (d4 <= d3), 0.0, 1.0, 0.0)
        t = d1 / (d1 - d3)
        put((vc <= 0) & (d1 >= 0) & (d3 <= 0), 1 - t, t, 0.0)
        put((d6 >= 0) & (d5 <= d6), 0.0, 0.0, 1.0)
        t = d2 / (d2 - d6)
        put((vb <= 0) & (d2 >= 0) & (d6 <= 0), 1 - t, 0.0, t)
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        put((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), 0.0, 1 - t, t)
        den = va + vb + vc
        put(np.ones(n, dtype=bool), va / den, vb / den, vc / den)
    q = bary[:, :1] * a + bary[:, 1:2] * b + bary[:, 2:] * c
    return np.linalg.norm(p - q, axis=1), bary


def closest_point(mesh, points):
    """Face index and barycentric coordinates of the closest surface point.

    ``points`` is (3,) or (N, 3).  Ties are resolved toward the lowest face
    index.  Candidates come from a KD-tree over face centroids: any face
    closer than the nearest vertex has its centroid within that distance
    plus the largest circumradius-like centroid-to-corner distance.
    """
    single = np.ndim(points) == 1
    P = np.atleast_2d(np.asarray(points, dtype=float))
    V = mesh.vertices
    F = mesh.faces
    tri = V[F]
    cen = tri.mean(axis=1)
    rad = np.linalg.norm(tri - cen[:, None], axis=2).max()
    d0, _ = cKDTree(V).query(P)
    cand = cKDTree(cen).query_ball_point(P, d0 + rad + 1e-12)
    counts = np.array([len(c) for c in cand])
    qi = np.repeat(np.arange(len(P)), counts)
    fi = np.concatenate([np.sort(c) for c in cand]).astype(np.int64)
    dist, bary = point_triangle(P[qi], tri[fi, 0], tri[fi, 1], tri[fi, 2])
    # per query: smallest distance, lowest face index on ties (fi sorted within each query)
    order = np.lexsort((fi, dist, qi))
    first = np.ones(len(order), dtype=bool)
    first[1:] = qi[order][1:] != qi[order][:-1]
    pick = order[first]
    out_f = fi[pick]
    out_b = bary[pick]
    if single:
        return int(out_f[0]), out_b[0]
    return out_f, out_b


def surface_points(mesh, faces, bary):
    """3D positions of (face, barycentric) points on the embedded mesh."""
    return np.einsum("ij,ijk->ik", np.atleast_2d(bary), mesh.vertices[mesh.faces[np.atleast_1d(faces)]])


def nearest_neighbor_maps(A, B):
    """Vertex-to-face maps A->B and B->A from closest points.

    Each map is ``(faces, barycentric)``.  Meshes carrying an intrinsic
    triangulation are queried on their original faces and converted back.
    """
    return _project(A.vertices, B), _project(B.vertices, A)


def _project(points, target):
    orig = getattr(target, "original", None)
    if orig is None:
        return closest_point(target, points)
    f, b = closest_point(orig, points)
    return target.from_original(f, b)
