"""Energies and operators on the product surface A x B in factored form.

A section is a complex ``(|V_A|, |V_B|)`` matrix ``Z``.  Row ``v`` is the
slice ``{v} x B`` and column ``w`` the slice ``A x {w}``.  Product-space
matrices are never formed.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .bundle.connection import DualPoisson
from .bundle.fem import f1, f2
from .errors import InputError, NumericalError
from .mesh.geodesic import geodesic_distance


def _check_shape(opsA, opsB, Z):
    if Z.shape != (opsA.L.shape[0], opsB.L.shape[0]):
        raise InputError("section has shape %s, expected (%d, %d)"
                         % (Z.shape, opsA.L.shape[0], opsB.L.shape[0]))


def _rdot(X, Y):
    """Real inner product Re sum(conj(X) * Y)."""
    return float(np.vdot(X, Y).real)


def dirichlet_operator(opsA, opsB, Z):
    """``L_A Z M_B^T + M_A Z L_B^T``."""
    return opsA.L @ (opsB.M @ Z.T).T + opsA.M @ (opsB.L @ Z.T).T


def dirichlet_energy(opsA, opsB, Z):
    _check_shape(opsA, opsB, Z)
    return 0.5 * _rdot(Z, dirichlet_operator(opsA, opsB, Z))


def gl_energy_and_gradient(opsA, opsB, Z, lam, V=None):
    """Ginzburg-Landau energy and its gradient for the real inner product.

    ``V`` is the well potential (array or :class:`PinningPotential`);
    ``None`` means the unconstrained well ``V = 1``.
    """
    _check_shape(opsA, opsB, Z)
    KZ = dirichlet_operator(opsA, opsB, Z)
    if V is None:
        V = 1.0
    elif isinstance(V, PinningPotential):
        V = V.values
    mm = opsA.mass[:, None] * opsB.mass[None, :]
    U = Z.real**2 + Z.imag**2 - V
    mU = mm * U
    E = 0.5 * _rdot(Z, KZ) + 0.25 * lam * float(np.sum(mU * U))
    G = KZ + lam * mU * Z
    if not np.isfinite(E):
        raise NumericalError("non-finite Ginzburg-Landau energy")
    return E, G


def mass_apply(massA, massB, Z):
    return massA[:, None] * Z * massB[None, :]


# --- pinning ------------------------------------------------------------------

@dataclass
class PinningPotential:
    values: np.ndarray
    sigma_a: float = 1.0
    sigma_b: float = 1.0
    landmarks: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    curves: list = field(default_factory=list)


def build_pinning_potential(A, B, landmarks=None, curves=None, sigma_a=1.0, sigma_b=1.0):
    """Well potential ``V = min_k (1 - exp(-dA_k^2/2sA^2 - dB_k^2/2sB^2))``.

    Each landmark pair ``(a, b)`` and each curve pair ``(chainA, chainB)``
    contributes one term, with geodesic distances to the point or curve.
    """
    landmarks = np.zeros((0, 2), dtype=np.int64) if landmarks is None else np.asarray(landmarks).reshape(-1, 2)
    curves = [] if curves is None else list(curves)
    if sigma_a <= 0 or sigma_b <= 0:
        raise InputError("pinning widths must be positive")
    V = np.ones((A.n_vertices, B.n_vertices))
    sources = [(int(a), int(b)) for a, b in landmarks] + [(np.asarray(ca), np.asarray(cb)) for ca, cb in curves]
    if sources:
        peak = np.zeros_like(V)
        for sa, sb in sources:
            ga = np.exp(-geodesic_distance(A, sa) ** 2 / (2 * sigma_a**2))
            gb = np.exp(-geodesic_distance(B, sb) ** 2 / (2 * sigma_b**2))
            np.maximum(peak, np.outer(ga, gb), out=peak)
        V = 1.0 - peak
    return PinningPotential(V, sigma_a, sigma_b, landmarks, curves)


def write_potential(path, V):
    V = np.ascontiguousarray(getattr(V, "values", V), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(b"IMSV1 %d %d\n" % V.shape)
        fh.write(V.tobytes())


def read_potential(path):
    with open(path, "rb") as fh:
        head = fh.readline().split()
        if len(head) != 3 or head[0] != b"IMSV1":
            raise InputError("%s: not an IMSV1 file" % path)
        r, c = int(head[1]), int(head[2])
        data = fh.read()
    if len(data) != 8 * r * c:
        raise InputError("%s: expected %d bytes of data, found %d" % (path, 8 * r * c, len(data)))
    return np.frombuffer(data, dtype="<f8").reshape(r, c).copy()


# --- slicewise initialization operator ------------------------------------------

class _SliceFamily:
    """Connections on one surface S indexed by the vertices of the other surface.

    ``r`` is (n_slices, E_S); ``curv`` a sparse (n_slices, F_S) curvature matrix.
    """

    def __init__(self, mesh, r, curv):
        self.mesh = mesh
        self.r = r
        self.curv = curv.tocoo()
        g = mesh.geometry
        self.diag = np.bincount(mesh.edges.ravel(), np.repeat(g.cot_weights, 2), minlength=mesh.n_vertices)
        self.w0 = -g.cot_weights
        n, ne = mesh.n_vertices, mesh.n_edges
        e = np.arange(ne)
        self.S0 = sp.csr_matrix((np.ones(ne), (mesh.edges[:, 0], e)), shape=(n, ne))
        self.S1 = sp.csr_matrix((np.ones(ne), (mesh.edges[:, 1], e)), shape=(n, ne))
        # per-face corner geometry for curvature corrections
        l = mesh.halfedge_lengths
        a = g.face_areas[:, None]
        lij2, ljk2, lki2 = l**2, np.roll(l, -1, axis=1) ** 2, np.roll(l, -2, axis=1) ** 2
        self.alpha = 0.5 * (lij2 - ljk2 + lki2)
        self.sides = lij2 + lki2
        self.area = a
        F = mesh.faces
        self.ci, self.cj, self.ck = F, np.roll(F, -1, axis=1), np.roll(F, -2, axis=1)
        he = np.arange(3 * mesh.n_faces).reshape(-1, 3)
        jk = np.roll(he, -1, axis=1)
        self.jk_edge = mesh.he_edge[jk]
        self.jk_sign = mesh.he_sign[jk]

    def apply(self, Z):
        """Rows of Z are sections on S; returns rows of ``L^{v} z^{(v)}``."""
        e0, e1 = self.mesh.edges[:, 0], self.mesh.edges[:, 1]
        R = self.r
        X1 = self.w0 * np.conj(R) * Z[:, e1]
        X2 = self.w0 * R * Z[:, e0]
        out = self.diag * Z + (self.S0 @ X1.T).T + (self.S1 @ X2.T).T
        if self.curv.nnz:
            out += self._curvature_part(Z)
        return out

    def _curvature_part(self, Z):
        s, f, om = self.curv.row, self.curv.col, self.curv.data
        nz = om != 0
        s, f, om = s[nz], f[nz], om[nz]
        out = np.zeros_like(Z)
        if len(s) == 0:
            return out
        d1 = (f1(om) - f1(0.0))[:, None]
        d2 = (f2(om) - f2(0.0))[:, None]
        rjk = R = self.r[s[:, None], self.jk_edge[f]]
        rjk = np.where(self.jk_sign[f] > 0, R, np.conj(R))
        dw = np.conj(rjk) / self.area[f] * (self.sides[f] * d1 + self.alpha[f] * d2)
        dd = om[:, None] ** 2 * (self.sides[f] + self.alpha[f]) / (360 * self.area[f])
        i, j, k = self.ci[f], self.cj[f], self.ck[f]
        ss = np.broadcast_to(s[:, None], i.shape)
        np.add.at(out, (ss, j), dw * Z[ss, k])
        np.add.at(out, (ss, k), np.conj(dw) * Z[ss, j])
        np.add.at(out, (ss, i), dd * Z[ss, i])
        return out

    def slice_connection(self, v):
        from .bundle.connection import Connection
        return Connection(self.r[v].copy(), np.asarray(self.curv.tocsr()[v].todense()).ravel())


@dataclass
class SliceConnection:
    """Per-slice connections concentrating the curvature at the initial map.

    ``r_ve[v]`` is the B-connection for slice ``{v} x B``; ``r_ev[:, w]`` the
    A-connection for slice ``A x {w}``.
    """

    r_ev: np.ndarray
    r_ve: np.ndarray
    curv_a: sp.csr_matrix
    curv_b: sp.csr_matrix
    massA: np.ndarray
    massB: np.ndarray
    family_a: _SliceFamily = None
    family_b: _SliceFamily = None


def _curvature_rows(target, n_slices, n_faces):
    t = np.asarray(target)
    if t.ndim == 1:
        if len(t) != n_slices or t.min() < 0 or t.max() >= n_faces:
            raise InputError("vertex-to-face map has wrong length or out-of-range faces")
        return sp.csr_matrix((np.full(n_slices, 2 * np.pi), (np.arange(n_slices), t)), shape=(n_slices, n_faces))
    if t.shape != (n_slices, n_faces):
        raise InputError("curvature density must have shape (%d, %d)" % (n_slices, n_faces))
    if np.abs(t.sum(axis=1) - 2 * np.pi).max() > 1e-9:
        raise InputError("curvature density rows must sum to 2*pi")
    return sp.csr_matrix(t)


def _retarget(mesh, conn, curv, anchor):
    poisson = DualPoisson(mesh, anchor)
    dense = curv.toarray() if hasattr(curv, "toarray") else curv
    rows, inv = np.unique(dense, axis=0, return_inverse=True)
    alpha = poisson.solve((rows - conn.omega[None, :]).T)
    return (np.exp(1j * alpha).T * conn.r[None, :])[inv.ravel()]


def build_slice_connection(A, B, connA, connB, phi, psi, anchor_a=0, anchor_b=0):
    """Slice connections from the maps ``phi: V_A -> F_B`` and ``psi: V_B -> F_A``.

    ``phi``/``psi`` may also be dense curvature densities with rows summing to 2 pi.
    """
    curv_b = _curvature_rows(phi, A.n_vertices, B.n_faces)
    curv_a = _curvature_rows(psi, B.n_vertices, A.n_faces)
    r_ve = _retarget(B, connB, curv_b, anchor_b)
    r_ev = _retarget(A, connA, curv_a, anchor_a).T
    sc = SliceConnection(r_ev=r_ev, r_ve=r_ve, curv_a=curv_a, curv_b=curv_b,
                         massA=A.geometry.lumped_mass, massB=B.geometry.lumped_mass)
    sc.family_b = _SliceFamily(B, r_ve, curv_b)
    sc.family_a = _SliceFamily(A, r_ev.T, curv_a)
    return sc


def slicewise_laplacian_apply(sc, Z):
    """``M_A[v] L_B^{v} z^{(v)}`` over rows plus ``M_B[w] L_A^{w} z^{(w)}`` over columns."""
    out = sc.massA[:, None] * sc.family_b.apply(Z)
    out += (sc.massB[:, None] * sc.family_a.apply(Z.T)).T
    return out
