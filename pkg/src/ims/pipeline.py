"""End-to-end correspondence pipeline used by the command line tool."""

import contextlib
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .bundle.connection import Connection, spin_connection, surface_connection, vector_field_connection
from .bundle.fem import build_fem_matrices
from .errors import ImsError, InputError, TopologyError
from .extract import (CorrespondenceMap, distortion_report, extract_maps, write_distortion, write_map,
                      write_overlay)
from .mesh.core import TriangleMesh
from .mesh.io import normalize, read_curves, read_input_map, read_landmarks, read_obj, write_obj
from .mesh.preprocess import fill_boundaries, intrinsic_delaunay
from .mesh.query import nearest_neighbor_maps, surface_points
from .multires import fine_anchor, geometric_initialization, upsample_section
from .product import build_pinning_potential, build_slice_connection
from .solve import (SolverConfig, base_eigenvalue, min_eigenvector_init, minimize, random_init,
                    write_trace_csv)

log = logging.getLogger(__name__)

CONNECTIONS = {"default": "surface", "surface": "surface", "vectorfield": "vectorfield", "spin": "spin"}


@dataclass
class RunConfig:
    mesh_a: str
    mesh_b: str
    landmarks: str = None
    curves: str = None
    init_map: str = None
    connection: str = "default"
    schedule: tuple = (100.0,)
    sigma_a: float = 1.0
    sigma_b: float = 1.0
    seed: int = 0
    idt: bool = True
    coarse_a: str = None
    coarse_b: str = None
    random_init: bool = False
    out: str = "ims_out"
    gtol: float = 1e-5
    maxiter: int = 1000

    def __post_init__(self):
        if self.connection not in CONNECTIONS:
            raise InputError("unknown connection %r (choose default, vectorfield or spin)" % self.connection)
        self.connection = CONNECTIONS[self.connection]
        try:
            self.schedule = tuple(float(t) for t in self.schedule)
            SolverConfig(schedule=self.schedule)
        except ValueError as e:
            raise InputError(str(e)) from e
        if self.sigma_a <= 0 or self.sigma_b <= 0:
            raise InputError("sigma values must be positive")
        if (self.coarse_a is None) != (self.coarse_b is None):
            raise InputError("--coarse-a and --coarse-b must be given together")
        for p in (self.mesh_a, self.mesh_b, self.landmarks, self.curves, self.init_map,
                  self.coarse_a, self.coarse_b):
            if p is not None and not os.path.isfile(p):
                raise InputError("file not found: %s" % p)

    def solver_config(self):
        return SolverConfig(schedule=self.schedule, gtol=self.gtol, maxiter=self.maxiter, seed=self.seed)


@contextlib.contextmanager
def stage(name, hint=""):
    """Prefix library errors with the pipeline stage and a remedy hint."""
    try:
        yield
    except ImsError as e:
        msg = "%s: %s" % (name, e)
        if hint:
            msg += " (%s)" % hint
        e.args = (msg,)
        raise


@dataclass
class Surface:
    """One side of the problem: input mesh, solver mesh and bundle."""

    input: TriangleMesh
    filled: TriangleMesh
    mesh: TriangleMesh
    curves: list
    conn: Connection
    ops: object
    anchor: int = 0
    texcoords: tuple = None

    def to_filled(self, faces, bary):
        if hasattr(self.mesh, "to_original"):
            return self.mesh.to_original(faces, bary)
        return np.asarray(faces), np.asarray(bary)

    def embed(self, faces, bary):
        f, b = self.to_filled(faces, bary)
        return surface_points(self.filled, f, b)


def make_connection(mesh, kind, anchor=0):
    if kind == "surface":
        return surface_connection(mesh, anchor)
    if kind == "vectorfield":
        return vector_field_connection(mesh, anchor)
    if kind == "spin":
        return spin_connection(mesh)
    raise InputError("unknown connection %r" % kind)


def load_mesh(path):
    """Read, topology-check and normalize an OBJ; returns (mesh, texcoords)."""
    V, F, tex = read_obj(path, with_texcoords=True)
    mesh = TriangleMesh(V, F)
    chi = mesh.euler_characteristic
    if chi + len(mesh.boundary_loops) != 2:
        raise TopologyError("%s is not genus zero: Euler characteristic %d with %d boundary loops"
                            % (path, chi, len(mesh.boundary_loops)), chi)
    return normalize(mesh), tex


def prepare_surface(mesh, idt=True, kind="surface", anchor=0, texcoords=None):
    with stage("boundary filling", "check that boundary loops have at least 3 vertices"):
        filled, _, curves = fill_boundaries(mesh)
    with stage("intrinsic Delaunay", "rerun with --no-idt to skip the flips"):
        solver_mesh = intrinsic_delaunay(filled) if idt else filled
    with stage("connection", "try a different --connection or check mesh quality"):
        conn = make_connection(solver_mesh, kind, anchor)
        ops = build_fem_matrices(solver_mesh, conn)
    return Surface(mesh, filled, solver_mesh, curves, conn, ops, anchor, texcoords)


def load_surface(path, idt=True, kind="surface", anchor=0):
    with stage("loading %s" % path, "meshes must be genus-zero triangle meshes"):
        mesh, tex = load_mesh(path)
    return prepare_surface(mesh, idt, kind, anchor, tex)


@dataclass
class Constraints:
    landmarks: np.ndarray = None
    curves: list = field(default_factory=list)


def read_constraints(config, A, B):
    c = Constraints()
    with stage("reading constraints", "indices are 0-based vertex ids of the input meshes"):
        if config.landmarks:
            c.landmarks = read_landmarks(config.landmarks, A.input.n_vertices, B.input.n_vertices)
        if config.curves:
            c.curves = read_curves(config.curves, A.input.n_vertices, B.input.n_vertices)
    # boundary curves of filled holes are pinned to each other in order
    c.curves = list(c.curves) + list(zip(A.curves, B.curves))
    return c


def initial_maps(A, B, init_map=None):
    """Vertex-to-face maps (phi: V_A -> F_B, psi: V_B -> F_A) on the solver meshes."""
    (phi, _), (psi, _) = nearest_neighbor_maps(A.mesh, B.mesh)
    if init_map:
        with stage("reading initial map", "expected one 'faceIdx [b0 b1 b2]' line per vertex of A"):
            f, b = read_input_map(init_map, A.mesh.n_vertices, B.filled)
        if hasattr(B.mesh, "from_original"):
            f, b = B.mesh.from_original(f, b)
        phi = np.asarray(f)
    return phi, psi


@dataclass
class SolveResult:
    A: Surface
    B: Surface
    Z: np.ndarray
    traces: list
    lam0: float
    maps: CorrespondenceMap
    timings: dict
    potential: object = None


def quantize(Z):
    """Round to complex64, the precision of stored sections."""
    return np.asarray(Z, dtype=np.complex64).astype(complex)


def solve_surfaces(A, B, config, constraints=None, Z0=None, phi=None, psi=None, overlay=True):
    """Initialization, annealed minimization and extraction for prepared surfaces."""
    timings = {}
    t0 = time.perf_counter()
    constraints = constraints or Constraints()
    V = None
    if constraints.landmarks is not None and len(constraints.landmarks) or constraints.curves:
        with stage("pinning potential", "check landmark and curve indices"):
            V = build_pinning_potential(A.mesh, B.mesh, constraints.landmarks, constraints.curves,
                                        config.sigma_a, config.sigma_b)
    sconf = config.solver_config()
    with stage("eigenvalue lambda_0", "mesh may be badly conditioned; remesh or enable iDT"):
        lam0 = base_eigenvalue(A.ops, B.ops, sconf)
    timings["lambda0"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    if Z0 is None:
        if config.random_init:
            Z0 = random_init((A.mesh.n_vertices, B.mesh.n_vertices), config.seed)
        else:
            if phi is None or psi is None:
                phi0, psi0 = initial_maps(A, B, config.init_map)
                phi = phi0 if phi is None else phi
                psi = psi0 if psi is None else psi
            with stage("initialization", "check the initial map"):
                sc = build_slice_connection(A.mesh, B.mesh, A.conn, B.conn, phi, psi, A.anchor, B.anchor)
                Z0 = min_eigenvector_init(sc, sconf, ops=(A.ops, B.ops))
    timings["init"] = time.perf_counter() - t1
    t2 = time.perf_counter()
    with stage("minimization", "try a different --anneal schedule"):
        Z, traces = minimize(A.ops, B.ops, Z0, sconf, V=V, lam0=lam0)
    timings["minimize"] = time.perf_counter() - t2
    t3 = time.perf_counter()
    Z = quantize(Z)
    with stage("extraction", "the section may not have converged; raise t or the iteration limit"):
        maps = extract_maps(A.mesh, B.mesh, A.conn, B.conn, Z, overlay=overlay)
    timings["extract"] = time.perf_counter() - t3
    return SolveResult(A, B, Z, traces, lam0, maps, timings, V)


def run(config):
    """Full pipeline (single or two-level); returns the fine :class:`SolveResult`."""
    t0 = time.perf_counter()
    kind = config.connection
    if config.coarse_a:
        Ac = load_surface(config.coarse_a, config.idt, kind)
        Bc = load_surface(config.coarse_b, config.idt, kind)
        coarse = solve_surfaces(Ac, Bc, config, read_constraints(config, Ac, Bc), overlay=False)
        with stage("loading fine meshes"):
            ma, ta = load_mesh(config.mesh_a)
            mb, tb = load_mesh(config.mesh_b)
        # the fine anchor must sit inside the coarse anchor face
        fa = fine_anchor(Ac.mesh, _solver_mesh(ma, config.idt), Ac.anchor)
        fb = fine_anchor(Bc.mesh, _solver_mesh(mb, config.idt), Bc.anchor)
        A = prepare_surface(ma, config.idt, kind, fa, ta)
        B = prepare_surface(mb, config.idt, kind, fb, tb)
        cons = read_constraints(config, A, B)
        with stage("multiresolution transfer"):
            if kind == "surface":
                Z0 = upsample_section(Ac.mesh, Bc.mesh, Ac.conn, Bc.conn, coarse.Z, A.mesh, B.mesh, kind)
                res = solve_surfaces(A, B, config, cons, Z0=Z0)
            else:
                (phi, _), (psi, _) = geometric_initialization(Ac.mesh, Bc.mesh, Ac.conn, Bc.conn, coarse.Z,
                                                              coarse.maps, A.mesh, B.mesh)
                res = solve_surfaces(A, B, config, cons, phi=phi, psi=psi)
        res.timings["coarse"] = sum(coarse.timings.values())
    else:
        A = load_surface(config.mesh_a, config.idt, kind)
        B = load_surface(config.mesh_b, config.idt, kind)
        res = solve_surfaces(A, B, config, read_constraints(config, A, B))
    res.timings["total"] = time.perf_counter() - t0
    return res


def _solver_mesh(mesh, idt):
    filled = fill_boundaries(mesh)[0]
    return intrinsic_delaunay(filled) if idt else filled


# --- section files ----------------------------------------------------------------

def write_section(path, Z):
    Z = np.ascontiguousarray(Z, dtype="<c8")
    with open(path, "wb") as fh:
        fh.write(b"IMSZ1 %d %d\n" % Z.shape)
        fh.write(Z.tobytes())


def read_section(path):
    try:
        with open(path, "rb") as fh:
            head = fh.readline().split()
            data = fh.read()
    except OSError as e:
        raise InputError("cannot read %s: %s" % (path, e)) from e
    if len(head) != 3 or head[0] != b"IMSZ1":
        raise InputError("%s: not an IMSZ1 section file" % path)
    try:
        r, c = int(head[1]), int(head[2])
    except ValueError as e:
        raise InputError("%s: malformed header" % path) from e
    if len(data) != 8 * r * c:
        raise InputError("%s: truncated section: expected %d bytes, found %d" % (path, 8 * r * c, len(data)))
    return np.frombuffer(data, dtype="<c8").reshape(r, c).astype(complex)


# --- outputs ----------------------------------------------------------------------

def spherical_uv(points):
    """Longitude/latitude texture coordinates about the origin."""
    p = points / np.maximum(np.linalg.norm(points, axis=1, keepdims=True), 1e-300)
    u = np.arctan2(p[:, 1], p[:, 0]) / (2 * np.pi) + 0.5
    v = 1 - np.arccos(np.clip(p[:, 2], -1, 1)) / np.pi
    return np.stack([u, v], axis=1)


def transfer_uv(B, faces, bary):
    """Texture coordinates of B at points given on B's filled mesh."""
    if B.texcoords is not None:
        vt, ft = B.texcoords
        ok = faces < len(ft)
        uv = spherical_uv(surface_points(B.filled, faces, bary))
        uv[ok] = np.einsum("ij,ijk->ik", bary[ok], vt[ft[faces[ok]]])
        return uv
    return spherical_uv(surface_points(B.filled, faces, bary))


def map_distortion(src, tgt, dmap):
    """Distortion of the piecewise-linear map of src's filled mesh given by vertex images."""
    img = tgt.embed(dmap.faces, dmap.bary)
    layout = src.filled.geometry.layout_faces()
    return distortion_report(src.filled.faces, layout, img, dmap.multi_zero)


def write_outputs(res, out, include_timings=True):
    os.makedirs(out, exist_ok=True)
    A, B, maps = res.A, res.B, res.maps
    fab, bab = B.to_filled(maps.a_to_b.faces, maps.a_to_b.bary)
    fba, bba = A.to_filled(maps.b_to_a.faces, maps.b_to_a.bary)
    write_map(os.path.join(out, "map_ab.txt"), fab, bab, maps.a_to_b.multi_zero, B.filled.n_vertices)
    write_map(os.path.join(out, "map_ba.txt"), fba, bba, maps.b_to_a.multi_zero, A.filled.n_vertices)
    if maps.overlay is not None:
        write_overlay(os.path.join(out, "overlay.txt"), maps.overlay)
        np.savetxt(os.path.join(out, "edges_a.txt"), A.mesh.edges, fmt="%d")
        np.savetxt(os.path.join(out, "edges_b.txt"), B.mesh.edges, fmt="%d")
    write_section(os.path.join(out, "section.imsz"), res.Z)
    if res.traces:
        write_trace_csv(os.path.join(out, "trace.csv"), res.traces)
    rep_ab = map_distortion(A, B, maps.a_to_b)
    rep_ba = map_distortion(B, A, maps.b_to_a)
    summary = {
        "vertices": [A.mesh.n_vertices, B.mesh.n_vertices],
        "lambda0": res.lam0,
        "schedule": [tr.t for tr in res.traces],
        "stages": [{"t": tr.t, "iterations": len(tr.rows) - 1 if tr.rows else 0, "converged": tr.converged,
                    "message": tr.message, "gradient_check": tr.fd_error} for tr in res.traces],
        "multi_zero_percent_ab": 100.0 * maps.a_to_b.multi_zero_rate,
        "multi_zero_percent_ba": 100.0 * maps.b_to_a.multi_zero_rate,
        "max_zero_residual": float(max(maps.a_to_b.residual.max(), maps.b_to_a.residual.max())),
        "overlay_crossings": 0 if maps.overlay is None else len(maps.overlay),
        "distortion_ba": rep_ba.summary(),
    }
    if include_timings:
        summary["timings"] = res.timings
    write_distortion(os.path.join(out, "distortion.csv"), os.path.join(out, "summary.json"), rep_ab, summary)
    # texture transfer: A with B's texture coordinates at the images of A's vertices
    write_obj(os.path.join(out, "transfer_texture.obj"), A.filled.vertices, A.filled.faces,
              texcoords=transfer_uv(B, fab, bab))
    write_obj(os.path.join(out, "transfer_geometry.obj"), B.embed(maps.a_to_b.faces, maps.a_to_b.bary),
              A.filled.faces)
    return dict(rep_ab.summary(), **summary)


def extract_from_file(section_path, config, out):
    """Rebuild the surfaces for ``config`` and extract maps from a saved section."""
    A = load_surface(config.mesh_a, config.idt, config.connection)
    B = load_surface(config.mesh_b, config.idt, config.connection)
    if config.coarse_a:
        # solver meshes of a staged run use anchors inside the coarse anchors
        Ac = load_surface(config.coarse_a, config.idt, config.connection)
        Bc = load_surface(config.coarse_b, config.idt, config.connection)
        A = prepare_surface(A.input, config.idt, config.connection, fine_anchor(Ac.mesh, A.mesh, 0), A.texcoords)
        B = prepare_surface(B.input, config.idt, config.connection, fine_anchor(Bc.mesh, B.mesh, 0), B.texcoords)
    with stage("reading section"):
        Z = read_section(section_path)
        if Z.shape != (A.mesh.n_vertices, B.mesh.n_vertices):
            raise InputError("section has shape %dx%d but the meshes have %d and %d vertices"
                             % (Z.shape + (A.mesh.n_vertices, B.mesh.n_vertices)))
    with stage("extraction"):
        maps = extract_maps(A.mesh, B.mesh, A.conn, B.conn, Z)
    res = SolveResult(A, B, Z, [], None, maps, {})
    return write_outputs(res, out)
