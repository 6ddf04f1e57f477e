"""Approximate geodesic distances by the heat method."""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import InputError, NumericalError


def _hat_gradients(geom):
    """(F, 3, 2) gradients of the hat functions in each face's planar layout."""
    P = geom.layout_faces()
    e = np.roll(P, -2, axis=1) - np.roll(P, -1, axis=1)   # edge opposite each corner, ccw
    rot = np.stack([-e[..., 1], e[..., 0]], axis=-1)
    return rot / (2 * geom.face_areas[:, None, None])


def geodesic_distance(mesh, source, t=None):
    """Distance from a set of source vertices (or vertex chains) to every vertex.

    ``source`` is an int, an index array, or a list of index arrays (polylines
    given as vertex chains).  Uses the mesh's intrinsic lengths, a diffusion
    time of ``t = mean_edge_length**2`` and natural (Neumann) boundary conditions.
    """
    if np.isscalar(source):
        src = np.array([source])
    elif len(source) and not np.isscalar(source[0]):
        src = np.unique(np.concatenate([np.asarray(s).ravel() for s in source]))
    else:
        src = np.unique(np.asarray(source).ravel())
    if len(src) == 0:
        raise InputError("empty geodesic source set")
    if src.min() < 0 or src.max() >= mesh.n_vertices:
        raise InputError("geodesic source index out of range")
    geom = mesh.geometry
    if t is None:
        t = mesh.mean_edge_length() ** 2
    L = geom.cotan_laplacian()
    M = sp.diags(geom.lumped_mass)
    u0 = np.zeros(mesh.n_vertices)
    u0[src] = 1.0
    u = spla.splu((M + t * L).tocsc()).solve(u0)

    G = _hat_gradients(geom)
    F = mesh.faces
    gu = np.einsum("fc,fcd->fd", u[F], G)
    nrm = np.linalg.norm(gu, axis=1)
    X = -gu / np.where(nrm > 0, nrm, 1.0)[:, None]
    b = np.bincount(F.ravel(), (np.einsum("fcd,fd->fc", G, X) * geom.face_areas[:, None]).ravel(),
                    minlength=mesh.n_vertices)
    # distances vanish on the whole source set (Dirichlet rows there)
    keep = np.ones(mesh.n_vertices, dtype=bool)
    keep[src] = False
    Lk = L.tocsr()[keep][:, keep].tocsc()
    phi = np.zeros(mesh.n_vertices)
    try:
        phi[keep] = spla.splu(Lk).solve(b[keep])
    except RuntimeError as e:
        raise NumericalError("geodesic Poisson solve failed: %s" % e) from e
    if not np.all(np.isfinite(phi)):
        raise NumericalError("geodesic Poisson solve produced non-finite values")
    return np.maximum(phi, 0.0)
