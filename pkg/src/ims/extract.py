"""Reading a correspondence off an optimized section.

Row ``v`` of ``Z`` is a section on B whose single zero is the image of
vertex ``v``; columns give the inverse direction.
"""

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bundle.fem import basis_weights, face_rho
from .errors import ExtractionError, InputError

TWO_PI = 2 * np.pi


# --- index forms ----------------------------------------------------------------

def angular_form(Zs, mesh, r):
    """Angles ``arg(z_j / (r_ij z_i))`` in [-pi, pi) per canonical edge.

    ``Zs`` holds one slice per row (or a single 1-D slice).
    """
    e0, e1 = mesh.edges[:, 0], mesh.edges[:, 1]
    Zs = np.asarray(Zs)
    w = np.angle(Zs[..., e1] * np.conj(r * Zs[..., e0]))
    w[w >= np.pi] -= TWO_PI
    return w


def index_form(omega_edges, mesh, curvature, tol=1e-6):
    """Integer index per face from edge angles; raises if not integral."""
    w = np.asarray(omega_edges)
    hw = w[..., mesh.he_edge] * mesh.he_sign
    s = hw.reshape(w.shape[:-1] + (-1, 3)).sum(axis=-1)
    ind = (s + curvature) / TWO_PI
    k = np.rint(ind)
    err = np.abs(ind - k)
    if err.size and err.max() > tol:
        raise ExtractionError("index form is not integral (deviation %.3g)" % err.max())
    return k.astype(np.int64), err


def _dejitter(Zs):
    Zs = np.array(Zs, dtype=complex)
    Zs[Zs == 0] = 1e-300
    return Zs


def slice_index_form(z, mesh, conn):
    """(edge angles, face indices) of a single slice section."""
    z = _dejitter(z)
    w = angular_form(z, mesh, conn.r)
    ind, _ = index_form(w, mesh, conn.omega)
    return w, ind


def face_angles(w, mesh, f):
    """Angles of the three ccw halfedges of face f from canonical edge angles."""
    h = 3 * f + np.arange(3)
    return w[..., mesh.he_edge[h]] * mesh.he_sign[h]


# --- zero of the interpolant inside one triangle -----------------------------------

def _F(bj, bk, A, B, C, wij, wki, Om):
    e1 = cmath.exp(1j * (bk * Om + wij))
    e2 = cmath.exp(-1j * (bj * Om + wki))
    val = (1 - bj - bk) * A + bj * B * e1 + bk * C * e2
    dj = -A + B * e1 + bk * C * e2 * (-1j * Om)
    dk = -A + bj * B * e1 * (1j * Om) + C * e2
    return val, dj, dk


def triangle_interpolant(b, omega, Omega, absz):
    """|z| of the curved interpolant at barycentric ``b`` (the zero equation's residual)."""
    A, B, C = absz
    return abs(_F(b[1], b[2], A, B, C, omega[0], omega[2], Omega)[0])


def _project_simplex(bj, bk):
    bj = max(bj, 0.0)
    bk = max(bk, 0.0)
    s = bj + bk
    if s > 1.0:
        bj, bk = bj / s, bk / s
    return bj, bk


def _newton(bj, bk, A, B, C, wij, wki, Om, scale, maxit=40):
    for _ in range(maxit):
        val, dj, dk = _F(bj, bk, A, B, C, wij, wki, Om)
        if abs(val) <= 1e-14 * scale:
            return bj, bk, True
        det = dj.real * dk.imag - dk.real * dj.imag
        if det == 0 or not math.isfinite(det):
            return bj, bk, False
        sj = -(dk.imag * val.real - dk.real * val.imag) / det
        sk = -(-dj.imag * val.real + dj.real * val.imag) / det
        nj, nk = bj + sj, bk + sk
        if nj < 0 or nk < 0 or nj + nk > 1:
            nj, nk = _project_simplex(bj + 0.5 * sj, bk + 0.5 * sk)
        if abs(nj - bj) + abs(nk - bk) < 1e-16:
            bj, bk = nj, nk
            val = _F(bj, bk, A, B, C, wij, wki, Om)[0]
            return bj, bk, abs(val) <= 1e-10 * scale
        bj, bk = nj, nk
    val = _F(bj, bk, A, B, C, wij, wki, Om)[0]
    return bj, bk, abs(val) <= 1e-10 * scale


def find_triangle_zero(omega, Omega, absz, steps=32, max_halvings=10):
    """Barycentric zero of a singular face by homotopy from the flat interpolant.

    ``omega = (w_ij, w_jk, w_ki)`` are the ccw edge angles, ``Omega`` the
    face curvature and ``absz`` the corner magnitudes.  Returns
    ``(bary, residual)`` with the residual relative to ``max(absz)``.
    """
    w0 = np.asarray(omega, dtype=float)
    A, B, C = (float(x) for x in absz)
    scale = max(A, B, C)
    if scale == 0:
        raise ExtractionError("all corner values vanish")
    total = w0.sum() + Omega
    ind = int(round(total / TWO_PI))
    if abs(ind) != 1 or abs(total - TWO_PI * ind) > 1e-6:
        raise ExtractionError("face index %.6g is not +-1" % (total / TWO_PI))
    shift = (Omega - 2 * w0 + (w0.sum() - w0)) / 3

    def forms(t):
        w = w0 + (1 - t) * shift
        if t < 1 and (np.any(w <= -np.pi) or np.any(w >= np.pi)):
            raise ExtractionError("homotopy edge angle left (-pi, pi) at t=%g" % t)
        if abs(w.sum() + t * Omega - TWO_PI * ind) > 1e-9:
            raise ExtractionError("index not conserved along homotopy at t=%g" % t)
        return w

    # t = 0: linear interpolant, solved directly
    w = forms(0.0)
    e1 = cmath.exp(1j * w[0])
    e2 = cmath.exp(-1j * w[2])
    cj, ck = B * e1 - A, C * e2 - A
    det = cj.real * ck.imag - ck.real * cj.imag
    if det == 0:
        raise ExtractionError("flat interpolant is degenerate")
    # cj*bj + ck*bk = -A as a real 2x2 system
    bj = -A * ck.imag / det
    bk = A * cj.imag / det
    bj, bk = _project_simplex(bj, bk)

    t = 0.0
    h = 1.0 / steps
    min_h = h / 2**max_halvings
    while t < 1.0:
        tn = min(1.0, t + h)
        w = forms(tn)
        nj, nk, ok = _newton(bj, bk, A, B, C, w[0], w[2], tn * Omega, scale)
        if ok:
            t, bj, bk = tn, nj, nk
            h = min(1.0 / steps, 2 * h)
            continue
        h *= 0.5
        if h < min_h:
            raise ExtractionError("homotopy Newton failed at t=%.6g (omega=%s, Omega=%.6g, |z|=%s)"
                                  % (t, np.array2string(w0), Omega, np.array2string(np.asarray(absz))))
    b = np.array([1 - bj - bk, bj, bk])
    b = np.clip(b, 0.0, 1.0)
    b /= b.sum()
    res = triangle_interpolant(b, w0, Omega, (A, B, C)) / scale
    return b, res


# --- correspondence maps --------------------------------------------------------

@dataclass
class DirectionalMap:
    """Per-source-vertex image on the target (faces on the target's triangulation)."""

    faces: np.ndarray
    bary: np.ndarray
    multi_zero: np.ndarray
    residual: np.ndarray
    n_target: int
    candidates: dict = field(default_factory=dict)

    @property
    def multi_zero_rate(self):
        return float(self.multi_zero.mean()) if len(self.multi_zero) else 0.0


@dataclass
class CorrespondenceMap:
    a_to_b: DirectionalMap
    b_to_a: DirectionalMap
    overlay: np.ndarray = None     # rows (eA, eB, s, t)


def _locate(z, w, ind, mesh, conn, f):
    om = face_angles(w, mesh, f)
    absz = np.abs(z[mesh.faces[f]])
    return find_triangle_zero(om, conn.omega[f], absz)


def map_slices(Zs, mesh, conn, chunk=256, seed=0):
    """Extract the zero of every row of ``Zs`` (sections on ``mesh``)."""
    Zs = np.asarray(Zs)
    n = len(Zs)
    faces = np.empty(n, dtype=np.int64)
    bary = np.empty((n, 3))
    multi = np.zeros(n, dtype=bool)
    resid = np.empty(n)
    cands = {}
    rng = np.random.default_rng(seed)
    for start in range(0, n, chunk):
        Zc = _dejitter(Zs[start:start + chunk])
        W = angular_form(Zc, mesh, conn.r)
        try:
            IND, _ = index_form(W, mesh, conn.omega)
        except ExtractionError:
            # an edge angle sits on the branch cut: perturb the phases slightly and retry once
            Zc = Zc * np.exp(1j * 1e-10 * rng.standard_normal(Zc.shape))
            W = angular_form(Zc, mesh, conn.r)
            IND, _ = index_form(W, mesh, conn.omega)
        for r in range(len(Zc)):
            v = start + r
            row = IND[r]
            nz = np.flatnonzero(row)
            if row.sum() != 1:
                raise ExtractionError("slice %d has total index %d (expected 1)" % (v, row.sum()))
            pos = nz[row[nz] == 1]
            if len(pos) == 0:
                raise ExtractionError("slice %d has no face of index +1 (indices %s)" % (v, row[nz]))
            if len(nz) > 1:
                multi[v] = True
                cands[v] = nz
            best = None
            for f in pos:
                b, res = _locate(Zc[r], W[r], row, mesh, conn, f)
                if best is None or res < best[2] - 1e-15:
                    best = (f, b, res)
            faces[v], bary[v], resid[v] = best
    return DirectionalMap(faces, bary, multi, resid, mesh.n_faces, cands)


def map_vertex(B, connB, Z, v):
    """(face of B, barycentric, multi_zero) for vertex v of A."""
    m = map_slices(Z[v:v + 1], B, connB)
    return int(m.faces[0]), m.bary[0], bool(m.multi_zero[0])


def point_slice(A, connA, Z, f, bary):
    """Section on B at the point ``bary`` of face f of A (FEM combination of rows)."""
    rho = face_rho(A, connA.r, connA.omega)[f]
    w = basis_weights(rho, np.asarray(bary, dtype=float))
    return w @ Z[A.faces[f]]


def map_point(A, B, connA, connB, Z, f, bary):
    z = point_slice(A, connA, Z, f, bary)
    m = map_slices(z[None, :], B, connB)
    return int(m.faces[0]), m.bary[0], bool(m.multi_zero[0])


def extract_maps(A, B, connA, connB, Z, overlay=True):
    ab = map_slices(Z, B, connB)
    ba = map_slices(Z.T, A, connA)
    ov = edge_edge_intersections(A, B, connA, connB, Z) if overlay else None
    return CorrespondenceMap(ab, ba, ov)


# --- edge-edge crossings --------------------------------------------------------

def edge_edge_coefficients(zi, zj, zk, zl, rA, rB):
    """Coefficients (a, b, c, d) of the bilinear interpolant ``s(a t + b) + (c t + d)``.

    Corners: i = (A tail, B tail), j = (A head, B tail), k = (A head, B head),
    l = (A tail, B head); values are expressed in the gauge of corner i.
    """
    P = zj / (rA * zi)
    Q = zk / (rA * rB * zi)
    R = zl / (rB * zi)
    return 1 - P - R + Q, P - 1, R - 1, np.ones_like(P)


def solve_edge_edge(a, b, c, d, tol=1e-12):
    """Roots (s, t) in [0,1]^2 of ``s(a t + b) + (c t + d) = 0`` for one face."""
    qa = (a * np.conj(c)).imag
    qb = (a * np.conj(d) - c * np.conj(b)).imag
    qc = (b * np.conj(d)).imag
    if abs(qa) < 1e-14:
        ts = [-qc / qb] if qb != 0 else []
    else:
        disc = qb * qb - 4 * qa * qc
        if disc < 0:
            return []
        sq = math.sqrt(disc)
        # numerically stable pair of roots
        q = -0.5 * (qb + math.copysign(sq, qb))
        ts = [q / qa, qc / q] if q != 0 else [-qb / (2 * qa)]
    out = []
    for t in ts:
        if not -tol <= t <= 1 + tol:
            continue
        den = a * t + b
        n2 = abs(den) ** 2
        if n2 == 0:
            continue
        s = -((c * t + d) * np.conj(den)).real / n2
        if -tol <= s <= 1 + tol:
            out.append((min(max(s, 0.0), 1.0), min(max(t, 0.0), 1.0)))
    return out


def edge_edge_winding(Z, A, B, connA, connB, ea):
    """Winding numbers of the product faces ``ea x (all B edges)``."""
    iA, jA = A.edges[ea, 0], A.edges[ea, 1]
    a, b = B.edges[:, 0], B.edges[:, 1]
    rA = connA.r[ea][:, None]
    rB = connB.r[None, :]
    zi, zj, zk, zl = Z[iA][:, a], Z[jA][:, a], Z[jA][:, b], Z[iA][:, b]
    w = (np.angle(zj * np.conj(rA * zi)) + np.angle(zk * np.conj(rB * zj))
         - np.angle(zk * np.conj(rA * zl)) - np.angle(zl * np.conj(rB * zi)))
    return np.rint(w / TWO_PI).astype(np.int64), (zi, zj, zk, zl, rA, rB)


def edge_edge_intersections(A, B, connA, connB, Z, chunk=64):
    """Crossings of A's edges with B's edges in the overlay, as rows ``(eA, eB, s, t)``."""
    Z = _dejitter(Z)
    out = []
    for start in range(0, A.n_edges, chunk):
        ea = np.arange(start, min(start + chunk, A.n_edges))
        wind, (zi, zj, zk, zl, rA, rB) = edge_edge_winding(Z, A, B, connA, connB, ea)
        rows, cols = np.nonzero(wind)
        if len(rows) == 0:
            continue
        rBc = np.broadcast_to(rB, zi.shape)
        rAc = np.broadcast_to(rA, zi.shape)
        a, b, c, d = edge_edge_coefficients(zi[rows, cols], zj[rows, cols], zk[rows, cols],
                                            zl[rows, cols], rAc[rows, cols], rBc[rows, cols])
        for n in range(len(rows)):
            for s, t in solve_edge_edge(a[n], b[n], c[n], d[n]):
                out.append((ea[rows[n]], cols[n], s, t))
    return np.array(out, dtype=float).reshape(-1, 4)


# --- distortion -------------------------------------------------------------------

@dataclass
class DistortionReport:
    sigma: np.ndarray            # (F, 2), sigma_1 >= sigma_2
    f_area: np.ndarray           # per face
    f_sym: np.ndarray            # per face, nan where degenerate
    face_areas: np.ndarray
    excluded: np.ndarray         # faces touching multi-zero vertices
    degenerate: np.ndarray
    graph_area: float
    source_area: float
    det_integral: float
    dirichlet_integral: float
    sym_dirichlet: float

    @property
    def sandwich_ok(self):
        gap = self.graph_area - self.source_area
        tol = 1e-9 * max(1.0, self.graph_area)
        return bool(self.det_integral - tol <= gap <= self.dirichlet_integral + tol)

    def histograms(self, bins=20):
        keep = ~self.excluded
        fs = self.f_sym[keep & ~self.degenerate]
        return {"f_area": [h.tolist() for h in np.histogram(self.f_area[keep], bins=bins)],
                "f_sym": [h.tolist() for h in np.histogram(fs[np.isfinite(fs)], bins=bins)]}

    def summary(self):
        return {"graph_area": self.graph_area, "source_area": self.source_area,
                "det_integral": self.det_integral, "dirichlet_integral": self.dirichlet_integral,
                "sym_dirichlet": self.sym_dirichlet, "sandwich_ok": self.sandwich_ok,
                "excluded_faces": int(self.excluded.sum()), "degenerate_faces": int(self.degenerate.sum())}


def _planar(P):
    """(F, 3, 2) planar layout of (F, 3, 3) triangles preserving edge lengths."""
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    l1 = np.linalg.norm(e1, axis=1)
    x = np.einsum("ij,ij->i", e2, e1) / np.where(l1 > 0, l1, 1)
    y = np.sqrt(np.maximum(np.einsum("ij,ij->i", e2, e2) - x * x, 0.0))
    Q = np.zeros(P.shape[:2] + (2,))
    Q[:, 1, 0] = l1
    Q[:, 2, 0] = x
    Q[:, 2, 1] = y
    return Q


def distortion_report(source_faces, source_layout, image_points, multi_zero=None):
    """Per-face distortion of the piecewise-linear map given by vertex images.

    ``source_layout`` is (F, 3, 2) planar corners, ``image_points`` (V, 3).
    """
    F = np.asarray(source_faces)
    S = np.asarray(source_layout)
    Q = _planar(image_points[F])
    Ds = np.stack([S[:, 1] - S[:, 0], S[:, 2] - S[:, 0]], axis=-1)
    Dq = np.stack([Q[:, 1] - Q[:, 0], Q[:, 2] - Q[:, 0]], axis=-1)
    J = Dq @ np.linalg.inv(Ds)
    sig = np.linalg.svd(J, compute_uv=False)
    area = 0.5 * np.abs(np.linalg.det(Ds))
    s1, s2 = sig[:, 0], sig[:, 1]
    f_area = np.sqrt((1 + s1**2) * (1 + s2**2))
    degenerate = s2 <= 1e-12 * np.maximum(s1, 1e-300)
    with np.errstate(divide="ignore"):
        f_sym = np.where(degenerate, np.nan, s1**2 + s2**2 + 1 / s1**2 + 1 / s2**2)
    excl = np.zeros(len(F), dtype=bool)
    if multi_zero is not None:
        excl = np.asarray(multi_zero)[F].any(axis=1)
    k = ~excl
    ks = k & ~degenerate
    return DistortionReport(
        sigma=sig, f_area=f_area, f_sym=f_sym, face_areas=area, excluded=excl, degenerate=degenerate,
        graph_area=float((area * f_area)[k].sum()), source_area=float(area[k].sum()),
        det_integral=float((area * s1 * s2)[k].sum()),
        dirichlet_integral=float((area * 0.5 * (s1**2 + s2**2))[k].sum()),
        sym_dirichlet=float((area * f_sym)[ks].sum()))


# --- files ------------------------------------------------------------------------

def write_map(path, faces, bary, multi_zero, n_target):
    with open(path, "w") as fh:
        fh.write("IMSMAP v1 %d %d\n" % (len(faces), n_target))
        for v, (f, b, m) in enumerate(zip(faces, bary, multi_zero)):
            fh.write("%d %d %.17g %.17g %.17g %d\n" % (v, f, b[0], b[1], b[2], int(m)))


def read_map(path):
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 4 or head[:2] != ["IMSMAP", "v1"]:
            raise InputError("%s: not an IMSMAP v1 file" % path)
        n = int(head[2])
        rows = [l.split() for l in fh if l.strip()]
    if len(rows) != n:
        raise InputError("%s: expected %d rows, found %d" % (path, n, len(rows)))
    a = np.array(rows, dtype=float)
    return a[:, 1].astype(np.int64), a[:, 2:5], a[:, 5].astype(bool), int(head[3])


def write_overlay(path, overlay):
    with open(path, "w") as fh:
        for ea, eb, s, t in overlay:
            fh.write("%d %d %.17g %.17g\n" % (ea, eb, s, t))


def write_distortion(path_csv, path_json, report, extra=None):
    with open(path_csv, "w") as fh:
        fh.write("face,sigma1,sigma2,f_area,f_sym,excluded\n")
        for f in range(len(report.f_area)):
            fh.write("%d,%.17g,%.17g,%.17g,%.17g,%d\n" % (f, report.sigma[f, 0], report.sigma[f, 1],
                                                       report.f_area[f], report.f_sym[f], report.excluded[f]))
    data = report.summary()
    data["histograms"] = report.histograms()
    if extra:
        data.update(extra)
    with open(path_json, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_scalar)


def _json_scalar(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError("cannot serialize %r" % type(o))
