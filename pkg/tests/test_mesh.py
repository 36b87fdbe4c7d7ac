import numpy as np
import pytest

from gelsim.errors import DegenerateMesh
from gelsim.geometry import (
    TriMesh,
    load_obj,
    load_stl,
    make_box,
    make_cylinder,
    make_hex_nut,
    make_icosphere,
    make_socket,
    make_tube,
    save_obj,
    save_stl,
)


def _mesh_volume(mesh):
    tri = mesh.triangles
    return np.sum(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2]))) / 6.0


@pytest.mark.parametrize(
    "mesh,volume",
    [
        (make_box((0.4, 0.2, 0.1)), 0.4 * 0.2 * 0.1),
        (make_cylinder(0.05, 0.2, segments=256), np.pi * 0.05**2 * 0.2),
        (make_tube(0.03, 0.05, 0.1, segments=256), np.pi * (0.05**2 - 0.03**2) * 0.1),
        (make_icosphere(0.1, 4), 4 / 3 * np.pi * 0.1**3),
    ],
)
def test_primitives_watertight_with_correct_volume(mesh, volume):
    assert mesh.watertight
    assert _mesh_volume(mesh) == pytest.approx(volume, rel=5e-3)


def test_socket_and_nut_watertight():
    sock = make_socket(0.01, 0.02, 0.03, chamfer_width=0.002, chamfer_depth=0.002)
    nut = make_hex_nut(0.02, 0.006, 0.008)
    assert sock.watertight
    assert nut.watertight
    assert _mesh_volume(sock) > 0
    assert _mesh_volume(nut) > 0


def test_open_mesh_flagged():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]])
    f = np.array([[0, 1, 2]])
    assert not TriMesh(v, f).watertight


def test_degenerate_faces_dropped():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.5, 0, 0]])
    f = np.array([[0, 1, 2], [0, 1, 3]])  # second face is collinear
    m = TriMesh(v, f)
    assert len(m.faces) == 1


def test_no_faces_raises():
    with pytest.raises(DegenerateMesh):
        TriMesh(np.zeros((3, 3)), np.zeros((0, 3), dtype=int))


def test_obj_roundtrip(tmp_path):
    mesh = make_icosphere(0.05, 2)
    path = tmp_path / "ico.obj"
    save_obj(mesh, path)
    back = load_obj(path)
    assert back.watertight
    assert _mesh_volume(back) == pytest.approx(_mesh_volume(mesh), rel=1e-6)


def test_stl_roundtrip(tmp_path):
    mesh = make_box((0.1, 0.2, 0.3))
    path = tmp_path / "box.stl"
    save_stl(mesh, path)
    back = load_stl(path)
    assert back.watertight
    assert _mesh_volume(back) == pytest.approx(_mesh_volume(mesh), rel=1e-5)
