"""Finite elements for sections of a discrete line bundle.

The basis function of vertex ``u`` in face ``ijk`` is
``b_u(p) * exp(+1j * int_{p_u -> p} rho)`` where ``rho`` is the Whitney
interpolant of the edge angles ``rho_ij = arg r_ij`` (chosen so that
``rho_ij + rho_jk + rho_ki = Omega_ijk`` exactly).  Integrating these
against each other gives per-corner stencils whose curvature dependence
is carried by the three helper functions below.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

_TAYLOR = 0.1


def _closed_or_taylor(s, closed, taylor):
    s = np.asarray(s, dtype=float)
    out = np.empty(s.shape, dtype=complex)
    small = np.abs(s) < _TAYLOR
    out[small] = taylor(s[small])
    big = ~small
    out[big] = closed(s[big])
    return out if out.ndim else out[()]


def f0(s):
    return _closed_or_taylor(
        s,
        lambda s: (-6 - 6j * s + 3 * s**2 + 1j * s**3 + 6 * np.exp(1j * s)) / (3 * s**4),
        lambda s: (1 / 12 - s**2 / 360 + s**4 / 20160)
        + 1j * (s / 60 - s**3 / 2520 + s**5 / 181440))


def f1(s):
    return _closed_or_taylor(
        s,
        lambda s: (3 + 1j * s + s**4 / 24 - 1j * s**5 / 60
                   + (-3 + 2j * s + s**2 / 2) * np.exp(1j * s)) / s**4,
        lambda s: (s**2 / 120 - s**4 / 2688 + s**6 / 129600)
        + 1j * (-s / 24 + s**3 / 504 - s**5 / 17280))


def f2(s):
    return _closed_or_taylor(
        s,
        lambda s: (4 + 1j * s - 1j * s**3 / 6 - s**4 / 12 + 1j * s**5 / 30
                   + (-4 + 3j * s + s**2) * np.exp(1j * s)) / s**4,
        lambda s: (-1 / 4 + s**2 / 45 - s**4 / 1120 + s**6 / 56700)
        + 1j * (-s / 24 + 5 * s**3 / 1008 - 7 * s**5 / 51840))


@dataclass
class OperatorSet:
    """Connection Laplacian ``L``, connection mass ``M`` and lumped mass ``mass``."""

    L: sp.csr_matrix
    M: sp.csr_matrix
    mass: np.ndarray


def halfedge_transport(mesh, r):
    """(F, 3) transport along each halfedge, from per-edge canonical values."""
    rh = r[mesh.he_edge]
    return np.where(mesh.he_sign > 0, rh, np.conj(rh)).reshape(-1, 3)


def corner_stencils(mesh, r, omega):
    """Per-corner FEM contributions.

    For corner ``c`` of face ``f`` with vertices ``i, j, k`` (``i`` at ``c``)
    returns ``(wL, dL, wM, dM)``: ``wL``/``wM`` add to entry ``(j, k)`` and
    their conjugates to ``(k, j)``; ``dL``/``dM`` add to ``(i, i)``.
    """
    l = mesh.halfedge_lengths
    a = mesh.geometry.face_areas[:, None]
    lij = l
    ljk = np.roll(l, -1, axis=1)
    lki = np.roll(l, -2, axis=1)
    rjk = np.roll(halfedge_transport(mesh, r), -1, axis=1)
    om = np.asarray(omega, dtype=float)
    q0, q1, q2 = f0(om)[:, None], f1(om)[:, None], f2(om)[:, None]
    lij2, ljk2, lki2 = lij**2, ljk**2, lki**2
    alpha = 0.5 * (lij2 - ljk2 + lki2)
    wL = np.conj(rjk) / a * ((lij2 + lki2) * q1 + alpha * q2)
    dL = (ljk2 + om[:, None] ** 2 * (lij2 + alpha + lki2) / 90) / (4 * a)
    wM = a * np.conj(rjk) * q0
    dM = np.broadcast_to(a / 6, l.shape)
    return wL, dL, wM, dM


def _assemble(mesh, w, d):
    F = mesh.faces
    j = np.roll(F, -1, axis=1).ravel()
    k = np.roll(F, -2, axis=1).ravel()
    i = F.ravel()
    n = mesh.n_vertices
    rows = np.concatenate([j, k, i])
    cols = np.concatenate([k, j, i])
    vals = np.concatenate([w.ravel(), np.conj(w).ravel(), np.asarray(d, dtype=complex).ravel()])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def build_fem_matrices(mesh, conn):
    """Assemble the connection Laplacian and mass matrix for ``conn``."""
    wL, dL, wM, dM = corner_stencils(mesh, conn.r, conn.omega)
    return OperatorSet(L=_assemble(mesh, wL, dL), M=_assemble(mesh, wM, dM),
                       mass=mesh.geometry.lumped_mass.copy())


def face_rho(mesh, r, omega):
    """(F, 3) edge angles per halfedge, summing exactly to ``omega`` in each face."""
    rh = halfedge_transport(mesh, r)
    rho = np.angle(rh)
    rho[:, 2] = omega - rho[:, 0] - rho[:, 1]
    return rho


def basis_phase(rho, bary):
    """Phase ``int_{p_c -> p} rho`` for each corner c, at points with barycentric ``bary``.

    ``rho`` is (..., 3) with entry c the angle of halfedge c -> c+1; the result
    has the same shape as ``bary``.
    """
    rho = np.asarray(rho, dtype=float)
    b = np.asarray(bary, dtype=float)
    r0, r1, r2 = rho[..., 0], rho[..., 1], rho[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    # from corner i along ij (weight b_j) minus ki (weight b_k)
    p0 = b1 * r0 - b2 * r2
    p1 = b2 * r1 - b0 * r0
    p2 = b0 * r2 - b1 * r1
    return np.stack([p0, p1, p2], axis=-1)


def basis_weights(rho, bary):
    """Complex weights ``b_c exp(i phase_c)`` of the three corner basis functions."""
    return np.asarray(bary) * np.exp(1j * basis_phase(rho, bary))


def whitney_segment_integral(rho, b_start, b_end):
    """Integral of the Whitney 1-form along the straight segment between two points."""
    rho = np.asarray(rho, dtype=float)
    b0 = np.asarray(b_start, dtype=float)
    b1 = np.asarray(b_end, dtype=float)
    # the form sum rho_uv (b_u db_v - b_v db_u) is linear in b; midpoint rule is exact
    m = 0.5 * (b0 + b1)
    d = b1 - b0
    tot = 0.0
    for u in range(3):
        v = (u + 1) % 3
        tot = tot + rho[..., u] * (m[..., u] * d[..., v] - m[..., v] * d[..., u])
    return tot
