"""Invariant suite behind ``ims check``."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bundle.connection import Connection, levi_civita
from .bundle.fem import build_fem_matrices
from .errors import ImsError, InputError, NumericalError, TopologyError
from .mesh.core import TriangleMesh
from .mesh.io import normalize, read_obj
from .mesh.preprocess import fill_boundaries, intrinsic_delaunay
from .product import gl_energy_and_gradient
from .shapes import icosphere
from .solve import gradient_check


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""
    exit_code: int = 0


def _rel(X, Y):
    D = abs(X - Y)
    den = max(abs(Y).max(), 1e-300)
    return float(D.max() / den) if D.nnz else 0.0


def fem_reduction_error(mesh):
    """Max relative deviation of the trivial-bundle FEM matrices from cotan/Galerkin."""
    conn = Connection(np.ones(mesh.n_edges, dtype=complex), np.zeros(mesh.n_faces))
    ops = build_fem_matrices(mesh, conn)
    g = mesh.geometry
    return max(_rel(sp.csr_matrix(ops.L), g.cotan_laplacian()), _rel(sp.csr_matrix(ops.M), g.galerkin_mass()))


def _mesh_checks(path, kind, idt):
    from .pipeline import make_connection

    out = []
    tag = path
    try:
        V, F = read_obj(path)
        mesh = TriangleMesh(V, F)
    except ImsError as e:
        return [CheckResult("%s: load" % tag, False, str(e), e.exit_code)], None
    chi = mesh.euler_characteristic
    loops = len(mesh.boundary_loops)
    ok = chi + loops == 2
    out.append(CheckResult("%s: topology" % tag, ok, "chi=%d boundary_loops=%d" % (chi, loops),
                           TopologyError.exit_code))
    bad = mesh.check_triangle_inequality()
    out.append(CheckResult("%s: triangle inequality" % tag, len(bad) == 0,
                           "violating faces: %s" % bad[:10].tolist() if len(bad) else "all faces valid",
                           InputError.exit_code))
    if not ok or len(bad):
        return out, None
    try:
        filled = fill_boundaries(normalize(mesh))[0]
        m = intrinsic_delaunay(filled) if idt else filled
        gb = m.geometry.gauss_bonnet_residual()
        out.append(CheckResult("%s: Gauss-Bonnet" % tag, gb < 1e-9, "residual %.3g" % gb, NumericalError.exit_code))
        lc = levi_civita(m)
        s = abs(lc.omega.sum() - 2 * np.pi * m.euler_characteristic)
        h = lc.holonomy_residual(m).max()
        out.append(CheckResult("%s: Levi-Civita curvature" % tag, s < 1e-9 and h < 1e-9,
                               "sum residual %.3g, holonomy %.3g" % (s, h), NumericalError.exit_code))
        conn = make_connection(m, kind)
        s = abs(conn.omega.sum() - 2 * np.pi)
        h = conn.holonomy_residual(m).max()
        out.append(CheckResult("%s: %s connection" % (tag, kind), s < 1e-9 and h < 1e-9,
                               "sum residual %.3g, holonomy %.3g" % (s, h), NumericalError.exit_code))
        e = fem_reduction_error(m)
        out.append(CheckResult("%s: FEM reduction" % tag, e < 1e-12, "relative error %.3g" % e,
                               NumericalError.exit_code))
        return out, (m, conn)
    except ImsError as err:
        out.append(CheckResult("%s: preprocessing" % tag, False, str(err), err.exit_code))
        return out, None


def run_checks(paths, kind="surface", idt=True, seed=0, max_entries=10**6):
    """Run the invariant suite on one or two meshes; returns a list of :class:`CheckResult`."""
    from .pipeline import CONNECTIONS, make_connection

    kind = CONNECTIONS.get(kind, kind)
    results, surfaces = [], []
    for p in paths:
        r, s = _mesh_checks(p, kind, idt)
        results += r
        if s is not None:
            surfaces.append(s)
    if len(surfaces) != len(paths):
        return results
    if len(surfaces) == 1 or surfaces[0][0].n_vertices * surfaces[1][0].n_vertices > max_entries:
        m = TriangleMesh(*icosphere(2))
        surfaces = [surfaces[0], (m, make_connection(m, kind))]
    (ma, ca), (mb, cb) = surfaces
    opsA, opsB = build_fem_matrices(ma, ca), build_fem_matrices(mb, cb)
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(ma.n_vertices, mb.n_vertices)) + 1j * rng.normal(size=(ma.n_vertices, mb.n_vertices))
    lam = 100.0
    err = gradient_check(lambda X: gl_energy_and_gradient(opsA, opsB, X, lam), Z, seed=seed)
    results.append(CheckResult("gradient spot check (%dx%d)" % Z.shape, err < 1e-4,
                               "relative error %.3g" % err, NumericalError.exit_code))
    return results
