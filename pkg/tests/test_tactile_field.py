import numpy as np
import pytest

from gelsim.errors import DimensionMismatch
from gelsim.geometry import (
    TriMesh,
    build_sdf,
    make_box,
    make_icosphere,
    point_triangle_distance,
)
from gelsim.sensors import TactileSensorSpec
from gelsim.tactile import (
    ForceField,
    PenaltyParams,
    compute_force_field,
    net_wrench,
    penalty_forces,
    read_force_field_frames,
    sample_tactile_points,
    shear_map_image,
    write_force_field_frames,
)
from gelsim.transforms import IDENTITY_QUAT

from oracles import force_field_reference

STILL = dict(object_linvel=np.zeros(3), object_angvel=np.zeros(3),
             sensor_pos=np.zeros(3), sensor_quat=IDENTITY_QUAT,
             sensor_linvel=np.zeros(3), sensor_angvel=np.zeros(3))


@pytest.fixture(scope="module")
def plate_sdf():
    return build_sdf(make_box((0.1, 0.1, 0.02)), dims=(48, 48, 24), padding=0.01)


@pytest.fixture(scope="module")
def sphere_sdf():
    return build_sdf(make_icosphere(0.005, 3), dims=(48, 48, 48), padding=0.002)


def sensor_grid(rows=10, cols=10):
    return sample_tactile_points(TactileSensorSpec(), rows, cols)


# ---------------------------------------------------------------------------
# sample_tactile_points
# ---------------------------------------------------------------------------


def test_flat_grid_spacing_and_coplanarity():
    grid = sensor_grid(10, 10)
    assert grid.spacing[0] == pytest.approx(0.024 / 9)   # 2.67 mm
    assert grid.spacing[1] == pytest.approx(0.018 / 9)   # 2.0 mm
    assert np.all(grid.points[..., 2] == 0.0)


def test_grid_extent_and_count():
    grid = sensor_grid(100, 100)
    assert grid.flat().shape == (10000, 3)
    assert grid.points[..., 0].min() == pytest.approx(-0.012)
    assert grid.points[..., 0].max() == pytest.approx(0.012)
    assert grid.points[..., 1].min() == pytest.approx(-0.009)
    assert grid.points[..., 1].max() == pytest.approx(0.009)


def dome_mesh(radius=0.05, extent=0.016, n=24):
    xs = np.linspace(-extent, extent, n)
    ys = np.linspace(-extent, extent, n)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    gz = np.sqrt(radius**2 - gx**2 - gy**2) - radius  # gentle dome, apex z=0
    verts = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    faces = []
    for r in range(n - 1):
        for c in range(n - 1):
            i = r * n + c
            faces += [[i, i + 1, i + n], [i + 1, i + n + 1, i + n]]
    return TriMesh(verts, np.array(faces))


def test_curved_pad_points_on_mesh():
    mesh = dome_mesh()
    sensor = TactileSensorSpec(active_area=(0.02, 0.02), surface_mesh=mesh)
    grid = sample_tactile_points(sensor, 12, 12)
    pts = grid.flat()
    tri = mesh.triangles
    # point-to-mesh distance oracle: min over all triangles
    d = np.min(
        np.stack([
            point_triangle_distance(pts, np.broadcast_to(t, (len(pts), 3, 3)))
            for t in tri
        ]),
        axis=0,
    )
    assert d.max() < 1e-6


# ---------------------------------------------------------------------------
# compute_force_field
# ---------------------------------------------------------------------------


def test_no_penetration_zero_field(plate_sdf):
    grid = sensor_grid()
    fld = compute_force_field(
        grid, plate_sdf, object_pos=np.array([0, 0, 0.02]),
        object_quat=IDENTITY_QUAT, params=PenaltyParams(), **STILL)
    assert np.all(fld.f_n == 0)
    assert np.all(fld.f_t == 0)


def test_static_press_normal_magnitude(plate_sdf):
    # plate bottom face 1 mm below the gel plane: d = -1e-3 at every point
    grid = sensor_grid()
    params = PenaltyParams(k_n=1000.0, k_d=0.0, k_t=10.0, mu=2.0)
    fld = compute_force_field(
        grid, plate_sdf, object_pos=np.array([0, 0, 0.01 - 0.001]),
        object_quat=IDENTITY_QUAT, params=params, **STILL)
    mags = np.linalg.norm(fld.f_n, axis=-1)
    assert mags == pytest.approx(np.full((10, 10), 1.0), rel=1e-6)


def test_sliding_press_hits_cone_boundary(plate_sdf):
    grid = sensor_grid()
    params = PenaltyParams(k_n=1000.0, k_d=0.0, k_t=1e4, mu=1.0)
    kwargs = dict(STILL)
    kwargs["sensor_linvel"] = np.array([0.01, 0.0, 0.0])
    fld = compute_force_field(
        grid, plate_sdf, object_pos=np.array([0, 0, 0.01 - 0.001]),
        object_quat=IDENTITY_QUAT, params=params, **kwargs)
    expected = np.zeros((10, 10, 3))
    expected[..., 0] = -1.0  # -mu*|f_n| along the slip direction
    assert fld.f_t == pytest.approx(expected, abs=1e-9)


def test_batched_matches_single(plate_sdf):
    grid = sensor_grid()
    params = PenaltyParams()
    pos = np.array([[0, 0, 0.0095], [0, 0, 0.0090], [0, 0, 0.02]])
    quat = np.tile(IDENTITY_QUAT, (3, 1))
    fld = compute_force_field(grid, plate_sdf, pos, quat,
                              np.zeros((3, 3)), np.zeros((3, 3)),
                              np.zeros((3, 3)), quat, np.zeros((3, 3)),
                              np.zeros((3, 3)), params)
    for e in range(3):
        solo = compute_force_field(grid, plate_sdf, pos[e], IDENTITY_QUAT,
                                   params=params, **STILL)
        assert np.array_equal(fld.f_n[e], solo.f_n)
        assert np.array_equal(fld.f_t[e], solo.f_t)


def test_formula_equivalence_against_scalar_reference():
    rng = np.random.default_rng(11)
    n_pts = 10000
    d = rng.uniform(-2e-3, 1e-3, n_pts)
    d_dot = rng.uniform(-0.5, 0.5, n_pts)
    n = rng.normal(size=(n_pts, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    v_t = rng.normal(size=(n_pts, 3)) * 0.05
    params = PenaltyParams(k_n=850.0, k_d=40.0, k_t=7.0, mu=1.3)
    f_n, f_t = penalty_forces(d, d_dot, n, v_t, params)
    for i in range(0, n_pts, 37):
        rn, rt = force_field_reference(
            d[i], d_dot[i], tuple(n[i]), tuple(v_t[i]),
            params.k_n, params.k_d, params.k_t, params.mu)
        assert np.max(np.abs(f_n[i] - rn)) < 1e-12
        assert np.max(np.abs(f_t[i] - rt)) < 1e-12


def test_cone_and_directionality_random_sweep():
    rng = np.random.default_rng(12)
    n_pts = 10000
    d = rng.uniform(-3e-3, 5e-4, n_pts)
    d_dot = rng.uniform(-1, 1, n_pts)
    n = rng.normal(size=(n_pts, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    v_t = rng.normal(size=(n_pts, 3)) * rng.uniform(0, 0.2, (n_pts, 1))
    params = PenaltyParams(k_n=1200.0, k_d=90.0, k_t=15.0, mu=0.9)
    f_n, f_t = penalty_forces(d, d_dot, n, v_t, params)
    fn_mag = np.linalg.norm(f_n, axis=-1)
    ft_mag = np.linalg.norm(f_t, axis=-1)
    assert np.all(ft_mag <= params.mu * fn_mag + 1e-9)
    assert np.all(np.einsum("ij,ij->i", f_t, v_t) <= 0)
    assert np.all(np.einsum("ij,ij->i", f_n, n) >= 0)


def test_repulsion_clamp_when_separating_fast():
    # strong positive d_dot flips the coefficient sign; force must clamp to 0
    f_n, f_t = penalty_forces(-1e-3, 50.0, np.array([0, 0, 1.0]),
                              np.zeros(3), PenaltyParams(k_n=100.0, k_d=10.0))
    assert np.all(f_n == 0)


def test_resolution_consistency_after_density_normalization():
    # smooth, well-resolved press: 20 mm sphere, footprint ~7.6 mm radius
    r = 0.02
    big_sphere = build_sdf(make_icosphere(r, 4), dims=(64, 64, 64), padding=0.004)
    params = PenaltyParams()
    wrenches = {}
    for res in (10, 100):
        grid = sample_tactile_points(TactileSensorSpec(), res, res)
        fld = compute_force_field(
            grid, big_sphere, object_pos=np.array([0, 0, r - 0.0015]),
            object_quat=IDENTITY_QUAT, params=params, **STILL)
        force, _ = net_wrench(fld, grid)
        area_per_point = grid.spacing[0] * grid.spacing[1]
        wrenches[res] = force * area_per_point
    f10, f100 = wrenches[10], wrenches[100]
    assert np.linalg.norm(f10 - f100) / np.linalg.norm(f100) < 0.05


# ---------------------------------------------------------------------------
# net_wrench
# ---------------------------------------------------------------------------


def test_zero_field_zero_wrench():
    grid = sensor_grid()
    fld = ForceField(f_n=np.zeros((10, 10, 3)), f_t=np.zeros((10, 10, 3)))
    force, torque = net_wrench(fld, grid)
    assert np.all(force == 0)
    assert np.all(torque == 0)


def test_symmetric_press_zero_torque(plate_sdf):
    grid = sensor_grid()
    fld = compute_force_field(
        grid, plate_sdf, object_pos=np.array([0, 0, 0.01 - 0.0005]),
        object_quat=IDENTITY_QUAT, params=PenaltyParams(), **STILL)
    force, torque = net_wrench(fld, grid)
    extent = 0.024
    assert np.linalg.norm(torque) < 1e-9 * np.linalg.norm(force) * extent + 1e-15


def test_two_point_wrench_hand_sum():
    pts = np.zeros((1, 2, 3))
    pts[0, 0, 0] = 0.01
    pts[0, 1, 0] = -0.01
    from gelsim.tactile.points import TactilePointGrid

    grid = TactilePointGrid(points=pts, rest_normals=np.zeros((1, 2, 3)),
                            spacing=(0.02, 0.02))
    f_n = np.zeros((1, 2, 3))
    f_n[..., 2] = 1.0
    fld = ForceField(f_n=f_n, f_t=np.zeros((1, 2, 3)))
    force, torque = net_wrench(fld, grid)
    assert force == pytest.approx([0, 0, 2.0])
    assert torque == pytest.approx([0, 0, 0], abs=1e-15)


def test_wrench_dimension_mismatch():
    grid = sensor_grid(10, 10)
    fld = ForceField(f_n=np.zeros((5, 5, 3)), f_t=np.zeros((5, 5, 3)))
    with pytest.raises(DimensionMismatch):
        net_wrench(fld, grid)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def test_tff_roundtrip(tmp_path, plate_sdf):
    grid = sensor_grid()
    fld = compute_force_field(
        grid, plate_sdf, object_pos=np.array([0, 0, 0.0095]),
        object_quat=IDENTITY_QUAT, params=PenaltyParams(), **STILL)
    path = tmp_path / "frames.tff"
    write_force_field_frames(path, [fld, fld])
    back = read_force_field_frames(path)
    assert len(back) == 2
    assert np.allclose(back[0].f_n, fld.f_n, atol=1e-6)
    assert np.allclose(back[1].f_t, fld.f_t, atol=1e-6)
    raw = path.read_bytes()
    assert raw[:4] == b"TFF1"
    assert int.from_bytes(raw[4:8], "little") == 10
    assert int.from_bytes(raw[8:12], "little") == 10


def test_shear_map_image_shape():
    fld = ForceField(f_n=np.zeros((4, 6, 3)), f_t=np.zeros((4, 6, 3)))
    img = shear_map_image(fld, upscale=8)
    assert img.shape == (32, 48, 3)
    assert img.dtype == np.uint8
