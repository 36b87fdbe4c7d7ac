"""Triangle meshes: loading, cleanup, and procedural primitives.

Meshes are plain vertex/face arrays.  Loaders cover ASCII OBJ (v/f records
only) and binary STL.  The procedural constructors produce the watertight
primitives used throughout the task suite (pegs, sockets, nuts, weights), so
no external asset files are required.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DegenerateMesh

_DEGENERATE_AREA = 1e-16


@dataclass
class TriMesh:
    """Indexed triangle mesh in meters.

    vertices: (V, 3) float array.
    faces: (F, 3) int array, CCW winding, outward normals.
    watertight: every edge shared by exactly two faces with opposite
        orientation; required for signed distance computation.
    """

    vertices: np.ndarray
    faces: np.ndarray
    watertight: bool = field(default=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.faces) == 0:
            raise DegenerateMesh("mesh has no faces")
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise DegenerateMesh("face index out of range")
        self._drop_degenerate_faces()
        self.watertight = _is_watertight(self.faces)

    def _drop_degenerate_faces(self):
        tri = self.vertices[self.faces]
        area2 = np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1
        )
        keep = area2 > _DEGENERATE_AREA
        if not keep.any():
            raise DegenerateMesh("all faces degenerate")
        self.faces = self.faces[keep]

    @property
    def triangles(self) -> np.ndarray:
        """(F, 3, 3) corner positions."""
        return self.vertices[self.faces]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def face_normals(self) -> np.ndarray:
        tri = self.triangles
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def edge_lengths(self) -> np.ndarray:
        tri = self.triangles
        e = np.concatenate(
            [tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 1], tri[:, 0] - tri[:, 2]]
        )
        return np.linalg.norm(e, axis=1)

    def transformed(self, scale: float = 1.0, offset=(0.0, 0.0, 0.0)) -> "TriMesh":
        return TriMesh(self.vertices * scale + np.asarray(offset), self.faces.copy())


def _is_watertight(faces: np.ndarray) -> bool:
    # Each directed edge must appear exactly once (so each undirected edge is
    # shared by two consistently wound faces).
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    directed = {}
    for a, b in edges:
        key = (int(a), int(b))
        if key in directed:
            return False
        directed[key] = True
    for a, b in directed:
        if (b, a) not in directed:
            return False
    return True


def load_obj(path) -> TriMesh:
    """Read vertices and faces from an ASCII OBJ file.

    Only `v` and `f` records are honored; texture/normal indices in face
    records are stripped.  Polygonal faces are fan-triangulated.
    """
    vertices = []
    faces = []
    with open(path, "r") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not faces:
        raise DegenerateMesh(f"no faces in {path}")
    return TriMesh(np.array(vertices), np.array(faces))


def save_obj(mesh: TriMesh, path) -> None:
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def load_stl(path) -> TriMesh:
    """Read a binary STL file; vertices are merged exactly by coordinates."""
    raw = Path(path).read_bytes()
    if len(raw) < 84:
        raise DegenerateMesh(f"{path}: truncated STL")
    (count,) = struct.unpack_from("<I", raw, 80)
    expected = 84 + count * 50
    if len(raw) < expected:
        raise DegenerateMesh(f"{path}: truncated STL body")
    rec = np.frombuffer(raw[84:expected], dtype=np.uint8).reshape(count, 50)
    tris = rec[:, 12:48].copy().view("<f4").reshape(count, 3, 3).astype(np.float64)
    flat = tris.reshape(-1, 3)
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    faces = inverse.reshape(-1, 3)
    return TriMesh(uniq, faces)


def save_stl(mesh: TriMesh, path) -> None:
    tri = mesh.triangles.astype(np.float32)
    n = mesh.face_normals().astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(b"\0" * 80)
        fh.write(struct.pack("<I", len(tri)))
        for i in range(len(tri)):
            fh.write(n[i].tobytes())
            fh.write(tri[i].tobytes())
            fh.write(b"\0\0")


def load_mesh(path) -> TriMesh:
    path = Path(path)
    if path.suffix.lower() == ".obj":
        return load_obj(path)
    if path.suffix.lower() == ".stl":
        return load_stl(path)
    raise ValueError(f"unsupported mesh format: {path.suffix}")


def ray_mesh_intersect(origins: np.ndarray, directions: np.ndarray,
                       mesh: TriMesh) -> np.ndarray:
    """Nearest-hit ray parameter t per ray (np.inf on miss), t >= 0.

    Moller-Trumbore, vectorized over rays x triangles in blocks.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    tri = mesh.triangles
    v0, e1, e2 = tri[:, 0], tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
    best = np.full(len(origins), np.inf)
    block = max(1, 4_000_000 // max(len(tri), 1))
    for s in range(0, len(origins), block):
        o = origins[s:s + block, None]          # (R, 1, 3)
        dvec = directions[s:s + block, None]
        pvec = np.cross(dvec, e2[None])
        det = np.einsum("rtj,tj->rt", pvec, e1)
        ok = np.abs(det) > 1e-14
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        tvec = o - v0[None]
        u = np.einsum("rtj,rtj->rt", tvec, pvec) * inv
        qvec = np.cross(tvec, e1[None])
        v = np.einsum("rtj,rtj->rt", dvec, qvec) * inv
        t = np.einsum("tj,rtj->rt", e2, qvec) * inv
        hit = ok & (u >= -1e-12) & (v >= -1e-12) & (u + v <= 1 + 1e-12) & (t >= 0)
        t = np.where(hit, t, np.inf)
        best[s:s + block] = t.min(axis=1)
    return best


# ---------------------------------------------------------------------------
# Procedural primitives (all watertight, centered unless noted)
# ---------------------------------------------------------------------------


def make_box(size=(1.0, 1.0, 1.0)) -> TriMesh:
    sx, sy, sz = np.asarray(size, dtype=np.float64) / 2.0
    v = np.array(
        [
            [-sx, -sy, -sz], [+sx, -sy, -sz], [+sx, +sy, -sz], [-sx, +sy, -sz],
            [-sx, -sy, +sz], [+sx, -sy, +sz], [+sx, +sy, +sz], [-sx, +sy, +sz],
        ]
    )
    f = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # bottom (z-)
            [4, 5, 6], [4, 6, 7],  # top (z+)
            [0, 1, 5], [0, 5, 4],  # y-
            [2, 3, 7], [2, 7, 6],  # y+
            [1, 2, 6], [1, 6, 5],  # x+
            [3, 0, 4], [3, 4, 7],  # x-
        ]
    )
    return TriMesh(v, f)


def make_icosphere(radius: float = 1.0, subdivisions: int = 3) -> TriMesh:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    verts = list(v)
    faces = f
    for _ in range(subdivisions):
        midpoint_cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint_cache:
                midpoint_cache[key] = len(verts)
                verts.append((verts[i] + verts[j]) / 2.0)
            return midpoint_cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new_faces)
    verts = np.array(verts)
    verts = verts / np.linalg.norm(verts, axis=1, keepdims=True) * radius
    return TriMesh(verts, faces)


def _ring(radius: float, z: float, segments: int, phase: float = 0.0) -> np.ndarray:
    a = np.arange(segments) * (2 * np.pi / segments) + phase
    return np.stack([radius * np.cos(a), radius * np.sin(a), np.full(segments, z)], axis=1)


def _loft(idx_a, idx_b, flip=False):
    """Triangulate the band between two same-length vertex-index rings."""
    n = len(idx_a)
    faces = []
    for i in range(n):
        j = (i + 1) % n
        if flip:
            faces += [[idx_a[i], idx_b[i], idx_a[j]], [idx_a[j], idx_b[i], idx_b[j]]]
        else:
            faces += [[idx_a[i], idx_a[j], idx_b[i]], [idx_a[j], idx_b[j], idx_b[i]]]
    return faces


def _fan(center_idx, ring_idx, flip=False):
    n = len(ring_idx)
    faces = []
    for i in range(n):
        j = (i + 1) % n
        if flip:
            faces.append([center_idx, ring_idx[j], ring_idx[i]])
        else:
            faces.append([center_idx, ring_idx[i], ring_idx[j]])
    return faces


def make_cylinder(radius: float, height: float, segments: int = 24) -> TriMesh:
    """Closed cylinder, axis +z, centered at the origin."""
    lo, hi = -height / 2.0, height / 2.0
    bottom = _ring(radius, lo, segments)
    top = _ring(radius, hi, segments)
    verts = [np.array([0.0, 0.0, lo]), np.array([0.0, 0.0, hi])] + list(bottom) + list(top)
    ib = list(range(2, 2 + segments))
    it = list(range(2 + segments, 2 + 2 * segments))
    faces = _fan(0, ib, flip=True) + _fan(1, it) + _loft(ib, it)
    return TriMesh(np.array(verts), np.array(faces))


def make_tube(inner_radius: float, outer_radius: float, height: float,
              segments: int = 24) -> TriMesh:
    """Annular tube (through hole), axis +z, centered at the origin."""
    lo, hi = -height / 2.0, height / 2.0
    rings = [
        _ring(outer_radius, lo, segments), _ring(outer_radius, hi, segments),
        _ring(inner_radius, lo, segments), _ring(inner_radius, hi, segments),
    ]
    verts = np.concatenate(rings)
    n = segments
    ob, ot, ib, it = (list(range(k * n, (k + 1) * n)) for k in range(4))
    faces = (
        _loft(ob, ot)                    # outer wall
        + _loft(ib, it, flip=True)       # inner wall (normals point into bore)
        + _loft(ot, it)                  # top annulus
        + _loft(ob, ib, flip=True)       # bottom annulus
    )
    return TriMesh(verts, np.array(faces))


def make_socket(bore_radius: float, depth: float, outer_radius: float,
                chamfer_width: float = 0.0, chamfer_depth: float = 0.0,
                segments: int = 32) -> TriMesh:
    """Socket block with a blind coaxial bore opening at the top (z=top).

    The block spans z in [0, depth + base]; the bore descends `depth` from the
    top face.  An optional chamfer widens the bore mouth by `chamfer_width`
    over `chamfer_depth`.  Origin is at the bore axis on the top face.
    """
    base = max(depth * 0.25, 0.002)
    top_z, bottom_z = 0.0, -(depth + base)
    bore_bottom_z = -depth
    with_chamfer = chamfer_width > 0 and chamfer_depth > 0
    ring_specs = [
        ("outer_top", outer_radius, top_z),
        ("outer_bottom", outer_radius, bottom_z),
        ("mouth", bore_radius + (chamfer_width if with_chamfer else 0.0), top_z),
    ]
    if with_chamfer:
        ring_specs.append(("bore_top", bore_radius, top_z - chamfer_depth))
    ring_specs.append(("bore_bottom", bore_radius, bore_bottom_z))
    names = {}
    verts = []
    for name, r, z in ring_specs:
        names[name] = list(range(len(verts), len(verts) + segments))
        verts += list(_ring(r, z, segments))
    bore_wall_top = names["bore_top"] if with_chamfer else names["mouth"]
    bore_center = len(verts)
    verts.append(np.array([0.0, 0.0, bore_bottom_z]))
    under_center = len(verts)
    verts.append(np.array([0.0, 0.0, bottom_z]))
    faces = (
        _loft(names["outer_top"], names["outer_bottom"], flip=True)  # outer wall
        + _loft(names["outer_top"], names["mouth"])                  # top face annulus
        + _loft(bore_wall_top, names["bore_bottom"])                 # bore wall
        + _fan(bore_center, names["bore_bottom"])                    # bore floor
        + _fan(under_center, names["outer_bottom"], flip=True)       # underside
    )
    if with_chamfer:
        faces += _loft(names["mouth"], names["bore_top"])            # chamfer cone
    return TriMesh(np.array(verts), np.array(faces))


def make_hex_nut(across_flats: float, bore_radius: float, height: float) -> TriMesh:
    """Hexagonal nut with a cylindrical through hole, axis +z, centered."""
    r_hex = across_flats / np.sqrt(3.0)  # circumradius from across-flats width
    lo, hi = -height / 2.0, height / 2.0
    segments = 6
    hb = _ring(r_hex, lo, segments, phase=np.pi / 6)
    ht = _ring(r_hex, hi, segments, phase=np.pi / 6)
    # Match hole tessellation count to a multiplier of 6 for clean lofting of
    # the top/bottom annuli.
    hole_seg = 24
    ib = _ring(bore_radius, lo, hole_seg)
    it = _ring(bore_radius, hi, hole_seg)
    # Resample hex rings to hole_seg points by edge interpolation so the
    # annulus lofts 1:1.
    def resample_ring(ring, m):
        n = len(ring)
        out = []
        for k in range(m):
            t = k * n / m
            i = int(np.floor(t)) % n
            frac = t - np.floor(t)
            out.append(ring[i] * (1 - frac) + ring[(i + 1) % n] * frac)
        return np.array(out)

    hb = resample_ring(hb, hole_seg)
    ht = resample_ring(ht, hole_seg)
    verts = np.concatenate([hb, ht, ib, it])
    n = hole_seg
    ob, ot, ibx, itx = (list(range(k * n, (k + 1) * n)) for k in range(4))
    faces = (
        _loft(ob, ot)
        + _loft(ibx, itx, flip=True)
        + _loft(ot, itx)
        + _loft(ob, ibx, flip=True)
    )
    return TriMesh(verts, np.array(faces))
