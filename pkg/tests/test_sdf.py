import numpy as np
import pytest

from gelsim.errors import InvalidQuery, NonWatertightMesh
from gelsim.geometry import (
    TriMesh,
    build_sdf,
    make_box,
    make_icosphere,
    query_sdf,
    read_sdf_cache,
    relative_penetration_rate,
    write_sdf_cache,
)

from oracles import box_sdf, sphere_sdf


@pytest.fixture(scope="module")
def sphere_grid():
    return build_sdf(make_icosphere(1.0, 4), dims=(64, 64, 64), padding=0.3)


@pytest.fixture(scope="module")
def box_grid():
    return build_sdf(make_box((2.0, 2.0, 2.0)), dims=(64, 64, 64), padding=0.8)


def test_sphere_center_value(sphere_grid):
    q = query_sdf(sphere_grid, np.zeros(3))
    assert q.valid
    assert abs(q.distance - (-1.0)) < 2 * sphere_grid.spacing


def test_value_on_vertex_is_zero(sphere_grid):
    mesh = make_icosphere(1.0, 4)
    q = query_sdf(sphere_grid, mesh.vertices[17])
    assert abs(q.distance) < sphere_grid.spacing


def test_unit_cube_outside_point():
    # unit cube, query at (2,0,0): exact distance 2 - 0.5 = 1.5
    grid = build_sdf(make_box((1.0, 1.0, 1.0)), dims=(48, 48, 48), padding=1.6)
    q = query_sdf(grid, np.array([2.0, 0.0, 0.0]))
    assert q.valid
    assert q.distance == pytest.approx(1.5, abs=2 * grid.spacing)


def test_sphere_oracle_1000_points(sphere_grid):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.2, 1.2, size=(1000, 3))
    q = query_sdf(sphere_grid, pts)
    ana = sphere_sdf(pts, 1.0)
    assert np.all(q.valid)
    assert np.max(np.abs(q.distance - ana)) < 2 * sphere_grid.spacing


def test_box_oracle_1000_points(box_grid):
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1.5, 1.5, size=(1000, 3))
    q = query_sdf(box_grid, pts)
    ana = box_sdf(pts, (1.0, 1.0, 1.0))
    assert np.max(np.abs(q.distance - ana)) < 2 * box_grid.spacing


def test_interior_negative_exterior_positive(sphere_grid):
    rng = np.random.default_rng(2)
    dirs = rng.normal(size=(200, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    inside = dirs * 0.7
    outside = dirs * 1.25
    qi = query_sdf(sphere_grid, inside)
    qo = query_sdf(sphere_grid, outside)
    assert np.all(qi.distance < 0)
    assert np.all(qo.distance > 0)


def test_halfdepth_query(sphere_grid):
    p = np.array([0.0, 0.0, 0.5])
    q = query_sdf(sphere_grid, p)
    assert q.distance == pytest.approx(-0.5, abs=2 * sphere_grid.spacing)
    assert np.dot(q.normal, [0, 0, 1]) > 0.99


def test_normal_matches_radial_direction(sphere_grid):
    rng = np.random.default_rng(3)
    dirs = rng.normal(size=(100, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = dirs * 0.95
    q = query_sdf(sphere_grid, pts)
    err = np.linalg.norm(q.normal - dirs, axis=1)
    assert np.max(err) < 1e-2 * 3  # direction error within ~1.7 degrees


def test_out_of_bounds_sentinel(sphere_grid):
    q = query_sdf(sphere_grid, np.array([10.0, 0.0, 0.0]))
    assert not q.valid
    assert np.isinf(q.distance)


def test_gradient_near_surface_unit_norm(sphere_grid):
    g = np.stack(np.gradient(sphere_grid.values, sphere_grid.spacing), axis=-1)
    near = np.abs(sphere_grid.values) < 2 * sphere_grid.spacing
    norms = np.linalg.norm(g[near], axis=-1)
    assert norms.min() > 0.9
    assert norms.max() < 1.1


def test_gradient_consistent_with_interpolated_fd(sphere_grid):
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1.0, 1.0, size=(300, 3))
    h = sphere_grid.spacing * 0.25
    q = query_sdf(sphere_grid, pts)
    fd = np.zeros((len(pts), 3))
    for ax in range(3):
        e = np.zeros(3)
        e[ax] = h
        fd[:, ax] = (query_sdf(sphere_grid, pts + e).distance
                     - query_sdf(sphere_grid, pts - e).distance) / (2 * h)
    fd_norm = np.linalg.norm(fd, axis=1, keepdims=True)
    ok = fd_norm[:, 0] > 1e-6
    fd_unit = fd[ok] / fd_norm[ok]
    cos = np.einsum("ij,ij->i", fd_unit, q.normal[ok])
    assert np.median(1 - cos) < 1e-3
    assert np.quantile(1 - cos, 0.95) < 1e-2


def test_nonwatertight_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    open_mesh = TriMesh(v, np.array([[0, 1, 2]]))
    with pytest.raises(NonWatertightMesh):
        build_sdf(open_mesh, dims=(8, 8, 8), padding=0.1)


def test_penetration_rate_axis_aligned():
    from gelsim.geometry.sdf import SdfQuery

    q = SdfQuery(distance=np.array(-0.001), normal=np.array([0.0, 0.0, 1.0]),
                 valid=np.array(True))
    assert relative_penetration_rate(q, np.array([0.0, 0.0, -0.1])) == pytest.approx(-0.1)
    assert relative_penetration_rate(q, np.array([0.3, -0.2, 0.0])) == pytest.approx(0.0)


def test_penetration_rate_invalid_raises():
    from gelsim.geometry.sdf import SdfQuery

    q = SdfQuery(distance=np.array(np.inf), normal=np.zeros(3), valid=np.array(False))
    with pytest.raises(InvalidQuery):
        relative_penetration_rate(q, np.zeros(3))


def test_penetration_rate_matches_fd(sphere_grid):
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(50, 3))
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True) * 0.9
    vel = rng.normal(size=(50, 3)) * 0.01  # contact-scale speeds
    q = query_sdf(sphere_grid, pts)
    rate = relative_penetration_rate(q, vel)
    dt = 1e-5
    fd = (query_sdf(sphere_grid, pts + vel * dt).distance
          - query_sdf(sphere_grid, pts - vel * dt).distance) / (2 * dt)
    assert np.max(np.abs(rate - fd)) < 1e-3


def test_cache_roundtrip(tmp_path, sphere_grid):
    path = tmp_path / "sphere.tsdf"
    write_sdf_cache(sphere_grid, path)
    back = read_sdf_cache(path)
    assert back.dims == sphere_grid.dims
    assert back.spacing == pytest.approx(sphere_grid.spacing, rel=1e-6)
    assert np.allclose(back.values, sphere_grid.values, atol=1e-5)
    assert np.allclose(back.gradients, sphere_grid.gradients, atol=1e-5)
    # header layout: magic, version, dims, origin, spacing
    raw = path.read_bytes()
    assert raw[:4] == b"TSDF"
    assert int.from_bytes(raw[4:8], "little") == 1
