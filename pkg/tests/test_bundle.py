import numpy as np
import pytest

from ims.bundle.connection import (Connection, DualPoisson, levi_civita, prescribe_curvature, read_connection,
                                   spin_connection, surface_connection, vector_field_connection,
                                   write_connection)
from ims.bundle.fem import (basis_phase, basis_weights, build_fem_matrices, f0, f1, f2, face_rho,
                            whitney_segment_integral)
from ims.errors import InputError, PreconditionError
from ims.mesh.core import TriangleMesh
from ims.mesh.preprocess import intrinsic_delaunay
from ims.shapes import fibonacci_sphere, random_sphere

XG, WG = np.polynomial.legendre.leggauss(24)
XG, WG = 0.5 * (XG + 1), 0.5 * WG


def _cross2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _quadrature_forms(P, rho, z):
    """(int |s|^2, int |ds - i rho s|^2) over a planar triangle by Duffy-mapped Gauss rules."""
    area = 0.5 * abs(_cross2(P[1] - P[0], P[2] - P[0]))
    e = np.roll(P, -2, axis=0) - np.roll(P, -1, axis=0)
    grad_b = np.stack([-e[:, 1], e[:, 0]], axis=1) / (2 * area)
    if _cross2(P[1] - P[0], P[2] - P[0]) < 0:
        grad_b = -grad_b
    # phase_c = sum_d Pm[c, d] b_d
    Pm = np.array([[0, rho[0], -rho[2]], [-rho[0], 0, rho[1]], [rho[2], -rho[1], 0]])
    mass = dirichlet = 0.0
    for u, wu in zip(XG, WG):
        for v, wv in zip(XG, WG):
            b = np.array([1 - u, u * (1 - v), u * v])
            w = wu * wv * u * 2 * area
            ph = np.exp(1j * Pm @ b)
            s = np.sum(z * b * ph)
            ds_db = np.array([np.sum(z * ((np.arange(3) == d) + 1j * b * Pm[:, d]) * ph) for d in range(3)])
            ds = ds_db @ grad_b
            form = sum(rho[c] * (b[c] * grad_b[(c + 1) % 3] - b[(c + 1) % 3] * grad_b[c]) for c in range(3))
            cov = ds - 1j * form * s
            mass += w * abs(s) ** 2
            dirichlet += w * np.sum(np.abs(cov) ** 2)
    return mass, dirichlet


@pytest.mark.parametrize("seed", range(6))
def test_fem_stencils_match_quadrature(seed):
    rng = np.random.default_rng(seed)
    P2 = np.array([[0, 0], [1, 0], [0.3, 0.8]]) + 0.2 * rng.normal(size=(3, 2))
    if _cross2(P2[1] - P2[0], P2[2] - P2[0]) < 0:
        P2 = P2[[0, 2, 1]]
    V = np.hstack([P2, np.zeros((3, 1))])
    m = TriangleMesh(V, np.array([[0, 1, 2]]))
    rho_he = rng.uniform(-2.5, 2.5, 3)
    # edge values r from halfedge angles; face curvature is their sum
    r = np.empty(3, dtype=complex)
    for c in range(3):
        h = c
        r[m.he_edge[h]] = np.exp(1j * rho_he[c] * m.he_sign[h])
    conn = Connection(r, np.array([rho_he.sum()]))
    ops = build_fem_matrices(m, conn)
    rho = face_rho(m, conn.r, conn.omega)[0]
    assert np.allclose(np.exp(1j * rho), np.exp(1j * rho_he))
    for _ in range(3):
        z = rng.normal(size=3) + 1j * rng.normal(size=3)
        mass, dirichlet = _quadrature_forms(P2, rho, z)
        assert np.vdot(z, ops.M @ z).real == pytest.approx(mass, rel=1e-11)
        assert np.vdot(z, ops.L @ z).real == pytest.approx(dirichlet, rel=1e-11)


@pytest.mark.parametrize("f", [f0, f1, f2])
def test_helper_functions_branch_continuity(f):
    s = np.array([0.1 - 1e-9, 0.1 + 1e-9, -0.1 - 1e-9, -0.1 + 1e-9])
    v = f(s)
    assert abs(v[0] - v[1]) < 1e-8
    assert abs(v[2] - v[3]) < 1e-8


def test_helper_functions_values_at_zero():
    assert f0(0.0) == pytest.approx(1 / 12)
    assert f1(0.0) == pytest.approx(0.0)
    assert f2(0.0) == pytest.approx(-0.25)


def test_basis_phase_matches_segment_quadrature(rng):
    rho = rng.uniform(-2, 2, 3)
    for _ in range(10):
        p = rng.dirichlet([1, 1, 1])
        ph = basis_phase(rho, p)
        for c in range(3):
            corner = np.eye(3)[c]
            # numerical quadrature of the Whitney form along p_c -> p
            t = np.linspace(0, 1, 2001)
            pts = corner[None] + t[:, None] * (p - corner)[None]
            d = p - corner
            vals = sum(rho[u] * (pts[:, u] * d[(u + 1) % 3] - pts[:, (u + 1) % 3] * d[u]) for u in range(3))
            quad = np.trapezoid(vals, t) if hasattr(np, "trapezoid") else np.trapz(vals, t)
            assert ph[c] == pytest.approx(quad, abs=1e-10)
            assert whitney_segment_integral(rho, corner, p) == pytest.approx(quad, abs=1e-10)


def test_basis_weights_are_indicator_at_vertices(rng):
    rho = rng.uniform(-2, 2, 3)
    assert np.allclose(basis_weights(rho, np.eye(3)), np.eye(3))


def test_matrices_hermitian_and_definite(blob):
    conn = surface_connection(blob)
    ops = build_fem_matrices(blob, conn)
    assert abs(ops.L - ops.L.conj().T).max() < 1e-12
    assert abs(ops.M - ops.M.conj().T).max() < 1e-12
    w = np.linalg.eigvalsh(ops.L.toarray())
    assert w.min() > 0
    assert np.linalg.eigvalsh(ops.M.toarray()).min() > 0


def test_gauge_invariance(blob, rng):
    conn = surface_connection(blob)
    a = rng.uniform(-np.pi, np.pi, blob.n_vertices)
    g = np.exp(1j * a)
    e = blob.edges
    r2 = conn.r * g[e[:, 1]] * np.conj(g[e[:, 0]])
    A = build_fem_matrices(blob, conn).L.toarray()
    B = build_fem_matrices(blob, Connection(r2, conn.omega)).L.toarray()
    U = np.diag(g)
    assert np.abs(U.conj().T @ B @ U - A).max() < 1e-10


def test_levi_civita_curvature(blob):
    lc = levi_civita(blob)
    assert abs(lc.omega.sum() - 4 * np.pi) < 1e-9
    assert lc.holonomy_residual(blob).max() < 1e-9


@pytest.mark.parametrize("make", [surface_connection, vector_field_connection, spin_connection])
def test_matching_bundles(blob, make):
    conn = make(blob)
    assert abs(conn.omega.sum() - 2 * np.pi) < 1e-9
    assert conn.holonomy_residual(blob).max() < 1e-9
    assert np.allclose(np.abs(conn.r), 1)


def test_connection_spectra_agree(blob):
    vals = [np.linalg.eigvalsh(build_fem_matrices(blob, mk(blob)).L.toarray())[:4]
            for mk in (surface_connection, vector_field_connection, spin_connection)]
    assert np.allclose(vals[0], vals[1], rtol=1e-8)
    assert np.allclose(vals[0], vals[2], rtol=1e-8)


def test_prescribe_curvature_hits_target(blob, rng):
    conn = surface_connection(blob)
    w = rng.uniform(size=blob.n_faces)
    target = 2 * np.pi * w / w.sum()
    out = prescribe_curvature(blob, conn, target)
    assert out.holonomy_residual(blob).max() < 1e-9
    with pytest.raises(PreconditionError):
        prescribe_curvature(blob, conn, target * 1.1)


def test_dual_poisson_minimal_norm(blob, rng):
    dp = DualPoisson(blob)
    rhs = rng.normal(size=blob.n_faces)
    rhs -= rhs.mean()
    alpha = dp.solve(rhs)
    assert np.abs(blob.geometry.dec_d1 @ alpha - rhs).max() < 1e-9
    # minimal *1-norm: alpha is co-exact, orthogonal to exact forms d0 f
    f = rng.normal(size=blob.n_vertices)
    df = f[blob.edges[:, 1]] - f[blob.edges[:, 0]]
    assert abs(np.sum(df * blob.geometry.hodge_star1() * alpha)) < 1e-8
    with pytest.raises(InputError):
        DualPoisson(blob, anchor=blob.n_faces)


def test_connections_on_idt_mesh():
    V, F = random_sphere(300, seed=4)
    m = intrinsic_delaunay(TriangleMesh(V * [2, 1, 0.6], F))
    conn = surface_connection(m)
    assert conn.holonomy_residual(m).max() < 1e-9


def test_connection_file_roundtrip(tmp_path, blob):
    conn = surface_connection(blob)
    p = tmp_path / "conn.txt"
    write_connection(str(p), blob, conn)
    back = read_connection(str(p), blob)
    assert np.array_equal(back.r, conn.r)
    assert np.array_equal(back.omega, conn.omega)
    V, F = fibonacci_sphere(50)
    with pytest.raises(InputError):
        read_connection(str(p), TriangleMesh(V, F))


def test_monopole_eigenvalue_on_sphere():
    # unit-radius sphere: the degree-one bundle's lowest eigenvalue is 1/2, twice degenerate
    V, F = fibonacci_sphere(1500)
    m = TriangleMesh(V, F)
    import scipy.linalg as sla
    ops = build_fem_matrices(m, surface_connection(m))
    w = sla.eigh(ops.L.toarray(), ops.M.toarray(), eigvals_only=True, subset_by_index=[0, 2])
    assert w[0] == pytest.approx(0.5, rel=1e-2)
    assert w[1] == pytest.approx(w[0], rel=1e-3)
    assert w[2] > 1.5
