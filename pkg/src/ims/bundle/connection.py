"""Discrete connections on a surface and curvature prescription."""

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import InputError, NumericalError, PreconditionError, TopologyError
from .fem import halfedge_transport


@dataclass
class Connection:
    """Unit transport ``r`` per canonical edge (i<j) and curvature ``omega`` per face."""

    r: np.ndarray
    omega: np.ndarray

    def holonomy_residual(self, mesh):
        """Per-face |r_ki r_jk r_ij - exp(i omega)|."""
        hol = halfedge_transport(mesh, self.r).prod(axis=1)
        return np.abs(hol - np.exp(1j * self.omega))


def levi_civita(mesh):
    """Transport that preserves rescaled edge directions at both endpoints."""
    geom = mesh.geometry
    h = mesh.edge_halfedge
    t = mesh.he_twin[h]
    if np.any(t < 0):
        raise TopologyError("Levi-Civita connection needs a closed mesh")
    hd = geom.halfedge_directions
    r = -hd[t] * np.conj(hd[h])
    r = np.where(mesh.he_sign[h] > 0, r, np.conj(r))
    omega = geom.rescaled_angles.sum(axis=1) - np.pi
    return Connection(r / np.abs(r), omega)


class DualPoisson:
    """Factorized ``d1 *1^-1 d1^T`` with the anchor face's unknown pinned to zero."""

    def __init__(self, mesh, anchor=0):
        geom = mesh.geometry
        self.anchor = int(anchor)
        if not 0 <= self.anchor < mesh.n_faces:
            raise InputError("anchor face %d out of range" % anchor)
        self.d1 = geom.dec_d1
        self.inv_star = 1.0 / geom.hodge_star1()
        Ld = (self.d1 @ sp.diags(self.inv_star) @ self.d1.T).tocsc()
        keep = np.ones(mesh.n_faces, dtype=bool)
        keep[self.anchor] = False
        self.keep = keep
        try:
            self.lu = spla.splu(Ld[keep][:, keep].tocsc())
        except RuntimeError as e:
            raise NumericalError("dual Poisson system is singular: %s" % e) from e

    def solve(self, rhs):
        """Edge 1-form(s) ``alpha`` of minimal *1-norm with ``d1 alpha = rhs``.

        ``rhs`` is (F,) or (F, k) and must sum to zero over faces.
        """
        rhs = np.asarray(rhs, dtype=float)
        beta = np.zeros(rhs.shape)
        beta[self.keep] = self.lu.solve(np.ascontiguousarray(rhs[self.keep]))
        return (self.inv_star[:, None] * (self.d1.T @ beta.reshape(len(beta), -1))).reshape(
            (-1,) + rhs.shape[1:])


def prescribe_curvature(mesh, conn0, omega, anchor=0, poisson=None):
    """Multiply ``conn0`` by ``exp(i alpha)`` so that its curvature becomes ``omega``."""
    omega = np.asarray(omega, dtype=float)
    s0, s1 = conn0.omega.sum(), omega.sum()
    if abs(s1 - s0) > 1e-9 * max(1.0, abs(s0)):
        raise PreconditionError("curvature sums differ: target %.12g vs current %.12g" % (s1, s0))
    if poisson is None:
        poisson = DualPoisson(mesh, anchor)
    alpha = poisson.solve(omega - conn0.omega)
    return Connection(np.exp(1j * alpha) * conn0.r, omega.copy())


def surface_connection(mesh, anchor_face=0, poisson=None):
    """Trivialized bundle with curvature half of Levi-Civita's (total 2*pi)."""
    lc = levi_civita(mesh)
    start = np.zeros(mesh.n_faces)
    start[anchor_face] = 2 * np.pi
    base = Connection(np.ones(mesh.n_edges, dtype=complex), start)
    return prescribe_curvature(mesh, base, 0.5 * lc.omega, anchor_face, poisson)


def vector_field_connection(mesh, anchor_face=0):
    """Levi-Civita transport offset to curvature half of Levi-Civita's."""
    lc = levi_civita(mesh)
    chi = mesh.euler_characteristic
    tilde = lc.omega.copy()
    tilde[anchor_face] -= 2 * np.pi * (chi - 1)
    base = Connection(lc.r, tilde)
    return prescribe_curvature(mesh, base, 0.5 * lc.omega, anchor_face)


def spin_connection(mesh):
    """Square root of the Levi-Civita transport with consistent signs."""
    lc = levi_civita(mesh)
    s = np.sqrt(lc.r)
    target = 0.5 * lc.omega
    hol = halfedge_transport(mesh, s).prod(axis=1)
    flip_face = (np.real(hol * np.exp(-1j * target)) < 0).astype(np.int64)
    if flip_face.sum() % 2:
        raise TopologyError("spin structure sign parity is inconsistent")
    # BFS over the dual graph; each non-root face fixes its parity with its parent edge
    nf = mesh.n_faces
    parent_edge = np.full(nf, -1, dtype=np.int64)
    parent_face = np.full(nf, -1, dtype=np.int64)
    seen = np.zeros(nf, dtype=bool)
    seen[0] = True
    order = []
    q = deque([0])
    while q:
        f = q.popleft()
        order.append(f)
        for c in range(3):
            t = mesh.he_twin[3 * f + c]
            g = t // 3
            if t >= 0 and not seen[g]:
                seen[g] = True
                parent_edge[g] = mesh.he_edge[3 * f + c]
                parent_face[g] = f
                q.append(g)
    eps = np.zeros(mesh.n_edges, dtype=np.int64)
    parity = flip_face.copy()
    for f in reversed(order[1:]):
        if parity[f]:
            eps[parent_edge[f]] = 1
            parity[f] = 0
            parity[parent_face[f]] ^= 1
    if parity[0]:
        raise TopologyError("spin structure sign assignment failed")
    return Connection(np.where(eps == 1, -s, s), target)


def write_connection(path, mesh, conn):
    with open(path, "w") as fh:
        fh.write("# edges %d faces %d\n" % (mesh.n_edges, mesh.n_faces))
        for (i, j), r in zip(mesh.edges, conn.r):
            fh.write("%d %d %.17g %.17g\n" % (i, j, r.real, r.imag))
        for (i, j, k), w in zip(mesh.faces, conn.omega):
            fh.write("%d %d %d %.17g\n" % (i, j, k, w))


def read_connection(path, mesh):
    with open(path) as fh:
        rows = [l.split() for l in fh if l.strip() and not l.startswith("#")]
    ne, nf = mesh.n_edges, mesh.n_faces
    if len(rows) != ne + nf:
        raise InputError("%s: expected %d edge and %d face lines, found %d lines" % (path, ne, nf, len(rows)))
    try:
        e = np.array([[float(x) for x in r] for r in rows[:ne]])
        f = np.array([[float(x) for x in r] for r in rows[ne:]])
    except ValueError as err:
        raise InputError("%s: malformed number" % path) from err
    if not (np.array_equal(e[:, :2].astype(np.int64), mesh.edges)
            and np.array_equal(f[:, :3].astype(np.int64), mesh.faces)):
        raise InputError("%s: connectivity does not match the mesh" % path)
    return Connection(e[:, 2] + 1j * e[:, 3], f[:, 3])
