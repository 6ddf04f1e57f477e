"""Coarse-to-fine transfer of sections and maps between two-level mesh pairs."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bundle.fem import basis_weights, face_rho
from .errors import InputError
from .mesh.query import _project, closest_point, surface_points


@dataclass
class MeshPair:
    """Coarse and fine meshes of one surface with matching anchor faces."""

    coarse: object
    fine: object
    anchor_coarse: int = 0
    anchor_fine: int = 0


def _embedded(mesh):
    return getattr(mesh, "original", None) or mesh


def fine_anchor(coarse, fine, anchor_coarse=0):
    """A fine face whose closest point on the coarse mesh lies in the coarse anchor face.

    Returns the fine face closest to the coarse anchor's centroid when no
    face projects inside it exactly.
    """
    fc, fm = _embedded(coarse), _embedded(fine)
    cen = fm.vertices[fm.faces].mean(axis=1)
    f, _ = _project(cen, coarse) if fc is not coarse else closest_point(coarse, cen)
    hit = np.flatnonzero(np.asarray(f) == anchor_coarse)
    if len(hit):
        ff = int(hit[0])
    else:
        c = fc.vertices[fc.faces[anchor_coarse]].mean(axis=0)
        ff = int(np.argmin(np.linalg.norm(cen - c, axis=1)))
    if fm is not fine:
        # an original face of the fine mesh; take the intrinsic face holding its centroid
        g, _ = fine.from_original(np.array([ff]), np.full((1, 3), 1 / 3))
        ff = int(g[0])
    return ff


def prolongation(coarse, conn_coarse, fine):
    """Sparse complex (|V_fine|, |V_coarse|) FEM interpolation at closest points."""
    f, b = _project(_embedded(fine).vertices, coarse)
    rho = face_rho(coarse, conn_coarse.r, conn_coarse.omega)[f]
    w = basis_weights(rho, b)
    rows = np.repeat(np.arange(fine.n_vertices), 3)
    return sp.csr_matrix((w.ravel(), (rows, coarse.faces[f].ravel())),
                         shape=(fine.n_vertices, coarse.n_vertices))


def upsample_section(coarse_a, coarse_b, conn_a, conn_b, Z0, fine_a, fine_b, kind="surface"):
    """Fine section ``P_A Z0 P_B^T`` by product FEM interpolation at closest points.

    Only valid for globally trivialized bundles (``kind='surface'``).
    """
    if kind != "surface":
        raise InputError("direct section upsampling needs the default surface connection; "
                         "use geometric_initialization for '%s'" % kind)
    if Z0.shape != (coarse_a.n_vertices, coarse_b.n_vertices):
        raise InputError("coarse section has shape %s, expected (%d, %d)"
                         % (Z0.shape, coarse_a.n_vertices, coarse_b.n_vertices))
    PA = prolongation(coarse_a, conn_a, fine_a)
    PB = prolongation(coarse_b, conn_b, fine_b)
    return np.asarray(PA @ (PB @ Z0.T).T)


def _image_points(target, faces, bary):
    if hasattr(target, "embed"):
        return target.embed(faces, bary)
    return surface_points(target, faces, bary)


def compose_map(fine_src, coarse_src, coarse_tgt, fine_tgt, coarse_map, point_map):
    """Fine vertex -> coarse source point -> coarse image -> fine target face.

    ``point_map(face, bary)`` maps a point of the coarse source to
    ``(face, bary)`` on the coarse target; ``coarse_map`` holds the vertex images
    and is used when the closest point is a coarse vertex.
    """
    f, b = _project(_embedded(fine_src).vertices, coarse_src)
    faces = np.empty(len(f), dtype=np.int64)
    bary = np.empty((len(f), 3))
    for n, (ff, bb) in enumerate(zip(f, b)):
        c = int(np.argmax(bb))
        if bb[c] > 1 - 1e-12:
            v = coarse_src.faces[ff, c]
            faces[n], bary[n] = coarse_map.faces[v], coarse_map.bary[v]
        else:
            faces[n], bary[n] = point_map(int(ff), bb)[:2]
    P = _image_points(coarse_tgt, faces, bary)
    return _project(P, fine_tgt)


def geometric_initialization(coarse_a, coarse_b, conn_a, conn_b, Z0, maps, fine_a, fine_b):
    """Fine vertex-to-face maps (phi, psi) by composing the coarse correspondence with projections."""
    from .extract import map_point

    phi = compose_map(fine_a, coarse_a, coarse_b, fine_b, maps.a_to_b,
                      lambda f, b: map_point(coarse_a, coarse_b, conn_a, conn_b, Z0, f, b))
    psi = compose_map(fine_b, coarse_b, coarse_a, fine_a, maps.b_to_a,
                      lambda f, b: map_point(coarse_b, coarse_a, conn_b, conn_a, Z0.T, f, b))
    return phi, psi
