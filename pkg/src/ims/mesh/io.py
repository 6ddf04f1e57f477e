"""OBJ, landmark and curve file readers/writers."""

import numpy as np

from ..errors import InputError, TopologyError
from .core import TriangleMesh


def read_obj(path, with_texcoords=False):
    """Read vertices and triangles (0-based) from a Wavefront OBJ file.

    Face records may use ``v``, ``v/vt``, ``v//vn`` or ``v/vt/vn`` tokens;
    negative (relative) indices are resolved.  Polygons other than
    triangles raise :class:`InputError`.
    """
    V, F, VT, FT = [], [], [], []
    try:
        fh = open(path)
    except OSError as e:
        raise InputError("cannot read %s: %s" % (path, e)) from e
    with fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            try:
                if tag == "v":
                    V.append([float(x) for x in parts[1:4]])
                elif tag == "vt":
                    VT.append([float(x) for x in parts[1:3]])
                elif tag == "f":
                    toks = parts[1:]
                    if len(toks) != 3:
                        raise InputError("%s:%d: face with %d vertices (only triangles are supported)"
                                         % (path, lineno, len(toks)))
                    fv, ft = [], []
                    for t in toks:
                        sub = t.split("/")
                        fv.append(_resolve(int(sub[0]), len(V)))
                        if len(sub) > 1 and sub[1]:
                            ft.append(_resolve(int(sub[1]), len(VT)))
                    F.append(fv)
                    if len(ft) == 3:
                        FT.append(ft)
            except ValueError as e:
                raise InputError("%s:%d: cannot parse %r" % (path, lineno, line.strip())) from e
    if not V or not F:
        raise InputError("%s: no vertices or faces" % path)
    V = np.array(V, dtype=float)
    F = np.array(F, dtype=np.int64)
    if not with_texcoords:
        return V, F
    tex = None
    if VT and len(FT) == len(F):
        tex = (np.array(VT, dtype=float), np.array(FT, dtype=np.int64))
    return V, F, tex


def _resolve(i, n):
    return i - 1 if i > 0 else n + i


def write_obj(path, vertices, faces, texcoords=None, face_texcoords=None):
    with open(path, "w") as fh:
        for v in vertices:
            fh.write("v %.17g %.17g %.17g\n" % tuple(v))
        if texcoords is not None:
            for t in texcoords:
                fh.write("vt %.17g %.17g\n" % tuple(t))
        ft = face_texcoords if face_texcoords is not None else faces
        for k, f in enumerate(faces):
            if texcoords is None:
                fh.write("f %d %d %d\n" % tuple(np.asarray(f) + 1))
            else:
                a = np.asarray(f) + 1
                b = np.asarray(ft[k]) + 1
                fh.write("f %d/%d %d/%d %d/%d\n" % (a[0], b[0], a[1], b[1], a[2], b[2]))


def normalize(mesh):
    """Translate the area centroid to the origin and scale to unit surface area."""
    V = mesh.vertices
    F = mesh.faces
    area = mesh.geometry.face_areas
    total = area.sum()
    c = (V[F].mean(axis=1) * area[:, None]).sum(axis=0) / total
    s = 1.0 / np.sqrt(total)
    return TriangleMesh((V - c) * s, F, mesh.edge_lengths * s)


def load_and_normalize(path):
    """Load an OBJ, check it is a genus-zero surface (possibly with holes) and normalize it."""
    V, F = read_obj(path)
    mesh = TriangleMesh(V, F)
    chi = mesh.euler_characteristic
    if chi + len(mesh.boundary_loops) != 2:
        raise TopologyError("%s is not genus zero: Euler characteristic %d with %d boundary loops"
                            % (path, chi, len(mesh.boundary_loops)), chi)
    return normalize(mesh)


def read_landmarks(path, n_a=None, n_b=None):
    """Pairs ``a b`` (0-based vertex indices), one per line."""
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.split("#")[0].split()
            if not s:
                continue
            if len(s) != 2:
                raise InputError("%s:%d: expected two indices" % (path, lineno))
            try:
                pairs.append((int(s[0]), int(s[1])))
            except ValueError as e:
                raise InputError("%s:%d: bad index" % (path, lineno)) from e
    pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    _check_range(pairs[:, 0], n_a, path)
    _check_range(pairs[:, 1], n_b, path)
    return pairs


def read_curves(path, n_a=None, n_b=None):
    """Lines ``curveA: i0 i1 ... ; curveB: j0 j1 ...`` -> list of (chainA, chainB)."""
    curves = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#")[0].strip()
            if not line:
                continue
            try:
                left, right = line.split(";")
                ka, va = left.split(":")
                kb, vb = right.split(":")
                if ka.strip() != "curveA" or kb.strip() != "curveB":
                    raise ValueError
                a = np.array([int(x) for x in va.split()], dtype=np.int64)
                b = np.array([int(x) for x in vb.split()], dtype=np.int64)
            except ValueError as e:
                raise InputError("%s:%d: expected 'curveA: ... ; curveB: ...'" % (path, lineno)) from e
            if len(a) == 0 or len(b) == 0:
                raise InputError("%s:%d: empty curve" % (path, lineno))
            _check_range(a, n_a, path)
            _check_range(b, n_b, path)
            curves.append((a, b))
    return curves


def _check_range(idx, n, path):
    if n is not None and len(idx) and (idx.min() < 0 or idx.max() >= n):
        raise InputError("%s: vertex index out of range [0, %d)" % (path, n))


def read_input_map(path, n_src, target):
    """Vertex-to-face map: one ``faceIdx [b0 b1 b2]`` line per source vertex.

    A map file written by ``ims solve`` (``IMSMAP`` header) is also accepted.
    Returns ``(faces, barycentric)``; barycentric defaults to the centroid.
    """
    faces, bary = [], []
    with open(path) as fh:
        lines = [l.split() for l in fh if l.strip() and not l.startswith("#")]
    if lines and lines[0][0] == "IMSMAP":
        lines = [l[1:5] for l in lines[1:]]
    for l in lines:
        try:
            faces.append(int(l[0]))
            bary.append([float(x) for x in l[1:4]] if len(l) >= 4 else [1 / 3] * 3)
        except (ValueError, IndexError) as e:
            raise InputError("%s: malformed map line %r" % (path, " ".join(l))) from e
    faces = np.array(faces, dtype=np.int64)
    if len(faces) != n_src:
        raise InputError("%s: %d entries for %d source vertices" % (path, len(faces), n_src))
    if faces.min() < 0 or faces.max() >= target.n_faces:
        raise InputError("%s: face index out of range [0, %d)" % (path, target.n_faces))
    return faces, np.array(bary)
