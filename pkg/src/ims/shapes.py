"""Small procedural meshes used by tests, demos and ``ims check``."""

import numpy as np
from scipy.spatial import ConvexHull

from .mesh.core import TriangleMesh


def _orient_outward(V, F):
    c = V.mean(axis=0)
    n = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])
    flip = np.einsum("ij,ij->i", n, V[F].mean(axis=1) - c) < 0
    F = F.copy()
    F[flip] = F[flip][:, [0, 2, 1]]
    return F


def icosahedron():
    t = (1 + 5 ** 0.5) / 2
    V = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    F = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    return V, F


def icosphere(level=2):
    """Unit icosphere with 10*4**level + 2 vertices, as (V, F) arrays."""
    V, F = icosahedron()
    V = list(V)
    for _ in range(level):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                p = V[a] + V[b]
                V.append(p / np.linalg.norm(p))
                cache[key] = len(V) - 1
            return cache[key]

        nf = []
        for a, b, c in F:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        F = np.array(nf)
    return np.array(V), np.asarray(F)


def random_sphere(n, seed=0, jitter=0.0):
    """Convex hull of n random unit vectors (optionally radially jittered)."""
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(n, 3))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    F = ConvexHull(P).simplices
    F = _orient_outward(P, F)
    if jitter:
        P = P * (1 + jitter * rng.uniform(-1, 1, size=(n, 1)))
    return P, F


def fibonacci_sphere(n):
    """Near-uniform convex-hull sphere with n vertices."""
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    r = np.sqrt(1 - z * z)
    phi = np.pi * (1 + 5 ** 0.5) * i
    P = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    F = _orient_outward(P, ConvexHull(P).simplices)
    return P, F


def deform(V, axes=(1.0, 1.0, 1.0), bumps=0.0, freq=3, seed=0):
    """Scale by ``axes`` and add smooth radial bumps of relative height ``bumps``."""
    V = np.asarray(V, dtype=float)
    rng = np.random.default_rng(seed)
    d = V / np.linalg.norm(V, axis=1, keepdims=True)
    if bumps:
        k = rng.normal(size=(4, 3))
        ph = rng.uniform(0, 2 * np.pi, size=4)
        h = sum(np.sin(freq * d @ k[i] + ph[i]) for i in range(4)) / 4
        V = V * (1 + bumps * h)[:, None]
    return V * np.asarray(axes)


def torus(n=12, m=8, R=1.0, r=0.4):
    u, v = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    a = 2 * np.pi * u / n
    b = 2 * np.pi * v / m
    V = np.stack([(R + r * np.cos(b)) * np.cos(a), (R + r * np.cos(b)) * np.sin(a), r * np.sin(b)], -1)
    idx = lambda i, j: (i % n) * m + (j % m)
    F = []
    for i in range(n):
        for j in range(m):
            F += [[idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)], [idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]]
    return V.reshape(-1, 3), np.array(F)


def grid(nx, ny, width=1.0, height=1.0, jitter=0.0, seed=0):
    """Flat triangulated rectangle in the z=0 plane, normals along +z."""
    x, y = np.meshgrid(np.linspace(0, width, nx), np.linspace(0, height, ny), indexing="ij")
    V = np.stack([x, y, np.zeros_like(x)], -1).reshape(-1, 3)
    if jitter:
        rng = np.random.default_rng(seed)
        inner = (x > 0) & (x < width) & (y > 0) & (y < height)
        d = rng.uniform(-jitter, jitter, size=(nx * ny, 2)) * np.array([width / (nx - 1), height / (ny - 1)])
        V[inner.ravel(), :2] += d[inner.ravel()]
    idx = lambda i, j: i * ny + j
    F = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            F += [[idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)], [idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]]
    return V, np.array(F)


def disk(rings=4, sectors=8):
    """Flat unit disk: center vertex plus ``rings`` rings of ``sectors*k`` vertices."""
    V = [[0.0, 0.0, 0.0]]
    ring_start = [0]
    F = []
    prev = [0]
    for k in range(1, rings + 1):
        nk = sectors * k
        start = len(V)
        ring = list(range(start, start + nk))
        for s in range(nk):
            t = 2 * np.pi * s / nk
            V.append([k / rings * np.cos(t), k / rings * np.sin(t), 0.0])
        ring_start.append(start)
        F += _stitch(prev, ring)
        prev = ring
    return np.array(V), np.array(F)


def annulus(r0=0.5, r1=1.0, n=16, rings=3):
    V = []
    rows = []
    for k in range(rings + 1):
        r = r0 + (r1 - r0) * k / rings
        off = 0.5 * (k % 2)
        rows.append(list(range(len(V), len(V) + n)))
        for s in range(n):
            t = 2 * np.pi * (s + off) / n
            V.append([r * np.cos(t), r * np.sin(t), 0.0])
    F = []
    for k in range(rings):
        F += _stitch(rows[k], rows[k + 1])
    return np.array(V), np.array(F)


def _stitch(inner, outer):
    """Triangulate the band between two concentric vertex rings (ccw seen from +z)."""
    if len(inner) == 1:
        c = inner[0]
        return [[c, outer[s], outer[(s + 1) % len(outer)]] for s in range(len(outer))]
    F = []
    ni, no = len(inner), len(outer)
    i = j = 0
    while i < ni or j < no:
        # advance along whichever ring lags in angle
        if j < no and (i >= ni or (j + 1) / no <= (i + 1) / ni):
            F.append([inner[i % ni], outer[j % no], outer[(j + 1) % no]])
            j += 1
        else:
            F.append([inner[i % ni], outer[j % no], inner[(i + 1) % ni]])
            i += 1
    return F


def cube():
    V = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)
    quads = [[0, 1, 3, 2], [4, 6, 7, 5], [0, 4, 5, 1], [2, 3, 7, 6], [0, 2, 6, 4], [1, 5, 7, 3]]
    F = []
    for a, b, c, d in quads:
        F += [[a, b, c], [a, c, d]]
    return V, _orient_outward(V, np.array(F))


def mesh(V, F):
    return TriangleMesh(V, F)
