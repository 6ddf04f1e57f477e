import numpy as np
import pytest

from ims.bundle.connection import surface_connection
from ims.errors import InputError
from ims.extract import DirectionalMap
from ims.mesh.core import TriangleMesh
from ims.mesh.query import closest_point, surface_points
from ims.multires import compose_map, fine_anchor, geometric_initialization, prolongation, upsample_section
from ims.shapes import icosphere


@pytest.fixture(scope="module")
def levels():
    coarse = TriangleMesh(*icosphere(1))
    fine = TriangleMesh(*icosphere(2))
    return coarse, fine, surface_connection(coarse)


def test_prolongation_rows_are_convex_weights(levels):
    coarse, fine, conn = levels
    P = prolongation(coarse, conn, fine)
    assert P.shape == (fine.n_vertices, coarse.n_vertices)
    assert np.allclose(np.asarray(abs(P).sum(axis=1)).ravel(), 1)
    # icosphere levels are nested: coarse vertices are the first fine vertices
    assert np.allclose(abs(P[:coarse.n_vertices].toarray()), np.eye(coarse.n_vertices))


def test_upsample_is_product_of_prolongations(levels, rng):
    coarse, fine, conn = levels
    Z = rng.normal(size=(coarse.n_vertices, coarse.n_vertices)) + 1j * rng.normal(size=(coarse.n_vertices,) * 2)
    Zf = upsample_section(coarse, coarse, conn, conn, Z, fine, fine)
    P = prolongation(coarse, conn, fine).toarray()
    assert np.allclose(Zf, P @ Z @ P.T)
    with pytest.raises(InputError):
        upsample_section(coarse, coarse, conn, conn, Z, fine, fine, kind="vectorfield")
    with pytest.raises(InputError):
        upsample_section(coarse, coarse, conn, conn, Z[:3], fine, fine)


def test_fine_anchor_projects_into_coarse_anchor(levels):
    coarse, fine, _ = levels
    for a in (0, 7, 33):
        ff = fine_anchor(coarse, fine, a)
        c = fine.vertices[fine.faces[ff]].mean(axis=0)
        f, _ = closest_point(coarse, c[None])
        assert f[0] == a


def _vertex_map(mesh):
    faces = np.array([np.flatnonzero((mesh.faces == v).any(axis=1))[0] for v in range(mesh.n_vertices)])
    bary = np.array([np.eye(3)[list(mesh.faces[f]).index(v)] for v, f in enumerate(faces)])
    return DirectionalMap(faces, bary, np.zeros(mesh.n_vertices, dtype=bool), np.zeros(mesh.n_vertices),
                          mesh.n_faces, {})


def test_compose_identity_is_projection(levels):
    coarse, fine, _ = levels
    f, b = compose_map(fine, coarse, coarse, fine, _vertex_map(coarse), lambda face, bary: (face, bary))
    P = surface_points(fine, f, b)
    # fine vertex -> closest coarse point -> back onto the fine mesh
    h = fine.edge_lengths.mean()
    assert np.linalg.norm(P - fine.vertices, axis=1).max() < 0.5 * h
    assert np.allclose(P[:coarse.n_vertices], fine.vertices[:coarse.n_vertices])


def test_geometric_initialization_on_same_level(solved_pair):
    A, B, Z, maps = solved_pair.A, solved_pair.B, solved_pair.Z, solved_pair.maps
    (phi, _), (psi, _) = geometric_initialization(A.mesh, B.mesh, A.conn, B.conn, Z, maps, A.mesh, B.mesh)
    assert len(phi) == A.mesh.n_vertices and len(psi) == B.mesh.n_vertices
    # fine == coarse: every vertex reuses its own extracted image
    same = np.mean(phi == maps.a_to_b.faces)
    assert same > 0.95
