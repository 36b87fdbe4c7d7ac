import numpy as np
import pytest

from gelsim.errors import LutResolutionMismatch, RankDeficient
from gelsim.geometry import build_sdf, make_icosphere
from gelsim.render import (
    DepthImage,
    PolyLut,
    calibrate_lut,
    camera_for_sensor,
    depth_to_rgb,
    read_lut,
    reference_depth,
    render_depth,
    synthetic_lut,
    write_lut,
)
from gelsim.sensors import TactileSensorSpec
from gelsim.transforms import IDENTITY_QUAT

from oracles import sphere_cap_radius


@pytest.fixture(scope="module")
def sensor():
    return TactileSensorSpec()


@pytest.fixture(scope="module")
def camera(sensor):
    return camera_for_sensor(sensor)


@pytest.fixture(scope="module")
def background(camera, sensor):
    return reference_depth(camera, sensor)


@pytest.fixture(scope="module")
def sphere_sdf():
    return build_sdf(make_icosphere(0.005, 4), dims=(64, 64, 64), padding=0.002)


def test_background_is_gel_plane(camera, background):
    # flat pad at z=0, camera 20mm behind: near-axis pixel depth ~= 20mm
    # (pixel centers sit half a pixel off the optical axis)
    assert background.min() == pytest.approx(0.02, rel=1e-4)
    assert background[30, 40] == pytest.approx(0.02, rel=1e-4)
    # oblique rays are longer
    assert background[0, 0] > 0.02


def test_object_above_membrane_gives_exact_background(camera, background, sphere_sdf):
    img = render_depth(camera, sphere_sdf, np.array([0, 0, 0.0062]),
                       IDENTITY_QUAT, background)
    assert np.array_equal(img.values, background)


def test_footprint_area_matches_sphere_cap(camera, background, sphere_sdf):
    delta = 0.0005
    img = render_depth(camera, sphere_sdf, np.array([0, 0, 0.005 - delta]),
                       IDENTITY_QUAT, background)
    indent = img.indentation() > 1e-6
    r_disk = sphere_cap_radius(0.005, delta)
    px_per_m = camera.fx / 0.02  # at the gel plane
    expected_px = np.pi * r_disk**2 * px_per_m**2
    assert indent.sum() == pytest.approx(expected_px, rel=0.05)


def test_translation_shifts_footprint_by_projection(camera, background, sphere_sdf):
    delta = 0.0005
    dx = 0.001
    img0 = render_depth(camera, sphere_sdf, np.array([0, 0, 0.005 - delta]),
                        IDENTITY_QUAT, background)
    img1 = render_depth(camera, sphere_sdf, np.array([dx, 0, 0.005 - delta]),
                        IDENTITY_QUAT, background)

    def centroid_u(img):
        m = img.indentation()
        total = m.sum()
        return (m * np.arange(img.width)[None, :]).sum() / total

    shift = centroid_u(img1) - centroid_u(img0)
    predicted = camera.fx * dx / 0.02
    assert shift == pytest.approx(predicted, abs=1.0)


def test_batched_render_matches_single(camera, background, sphere_sdf):
    poses = np.array([[0, 0, 0.0046], [0.002, 0, 0.0044], [0, 0, 0.01]])
    quats = np.tile(IDENTITY_QUAT, (3, 1))
    batch = render_depth(camera, sphere_sdf, poses, quats, background)
    assert batch.values.shape == (3, 60, 80)
    for e in range(3):
        solo = render_depth(camera, sphere_sdf, poses[e], IDENTITY_QUAT, background)
        assert np.array_equal(batch.values[e], solo.values)


# ---------------------------------------------------------------------------
# LUT
# ---------------------------------------------------------------------------


def flat_depth(camera, value=0.02):
    return DepthImage(values=np.full((camera.height, camera.width), value),
                      background=np.full((camera.height, camera.width), value))


def test_flat_depth_maps_to_background_exactly(camera):
    lut = synthetic_lut((camera.width, camera.height))
    rgb = depth_to_rgb(flat_depth(camera), lut)
    assert np.array_equal(rgb, np.broadcast_to(lut.background_color, rgb.shape))


def test_tilted_plane_uniform_channel(camera):
    # LUT with R = 0.5 + g_x: slope s meters/px shows up directly in R
    coeffs = np.zeros((3, 6))
    coeffs[:, 0] = 0.5
    coeffs[0, 1] = 1.0  # (1,0) monomial on the red channel
    lut = PolyLut(degree=2, coeffs=coeffs, image_size=(camera.width, camera.height))
    s = 1e-4
    xs = np.arange(camera.width) * s
    values = np.broadcast_to(xs, (camera.height, camera.width)).copy()
    img = DepthImage(values=values, background=values)
    rgb = depth_to_rgb(img, lut)
    assert rgb[..., 0] == pytest.approx(np.full((camera.height, camera.width), 0.5 + s))
    assert rgb[..., 1] == pytest.approx(np.full((camera.height, camera.width), 0.5))


def test_steep_gradient_clamps(camera):
    coeffs = np.zeros((3, 6))
    coeffs[:, 0] = 0.5
    coeffs[0, 1] = 1.0
    lut = PolyLut(degree=2, coeffs=coeffs, image_size=(camera.width, camera.height))
    xs = np.arange(camera.width) * 10.0  # absurd slope
    values = np.broadcast_to(xs, (camera.height, camera.width)).copy()
    rgb = depth_to_rgb(DepthImage(values=values, background=values), lut)
    assert rgb.max() <= 1.0
    assert np.all(rgb[..., 0] == 1.0)


def test_lut_resolution_mismatch(camera):
    lut = synthetic_lut((10, 10))
    with pytest.raises(LutResolutionMismatch):
        depth_to_rgb(flat_depth(camera), lut)


def _calibration_scenes(camera, sphere_sdf, background, n=8):
    depths = []
    rng = np.random.default_rng(3)
    for _ in range(n):
        pos = np.array([rng.uniform(-4e-3, 4e-3), rng.uniform(-3e-3, 3e-3),
                        0.005 - rng.uniform(2e-4, 9e-4)])
        img = render_depth(camera, sphere_sdf, pos, IDENTITY_QUAT, background)
        depths.append(img.values)
    return depths


def _synthetic_sloped_depths(camera, n=6, scale=0.05, seed=4):
    rng = np.random.default_rng(seed)
    H, W = camera.height, camera.width
    gy, gx = np.mgrid[0:H, 0:W].astype(np.float64)
    out = []
    for _ in range(n):
        a, b, c, d, e = rng.uniform(-scale, scale, 5)
        out.append(a * gx + b * gy + (c * gx**2 + d * gx * gy + e * gy**2) / W)
    return out


def test_calibration_recovers_known_lut(camera):
    # synthetic round trip: depths with rich O(0.05 m/px) gradients
    true_lut = synthetic_lut((camera.width, camera.height), seed=5)
    samples = [(v, _unclamped_eval(true_lut, v))
               for v in _synthetic_sloped_depths(camera)]
    fit = calibrate_lut(samples, degree=2)
    assert np.max(np.abs(fit.coeffs - true_lut.coeffs)) < 1e-8
    assert fit.residual_rms < 1e-10


def test_calibration_prediction_rms_on_rendered_scenes(camera, sphere_sdf, background):
    # realistic gradient scales: coefficient recovery is looser but the
    # predicted colors must agree to well under 1e-6 RMS
    true_lut = synthetic_lut((camera.width, camera.height), seed=5)
    samples = []
    for values in _calibration_scenes(camera, sphere_sdf, background):
        samples.append((values, _unclamped_eval(true_lut, values)))
    fit = calibrate_lut(samples, degree=2)
    err = []
    for values, rgb in samples:
        err.append(_unclamped_eval(fit, values) - rgb)
    rms = np.sqrt(np.mean(np.concatenate(err) ** 2))
    assert rms < 1e-9


def _unclamped_eval(lut, values):
    from gelsim.render.lut import _design_matrix, depth_gradients

    g_x, g_y = depth_gradients(values)
    return _design_matrix(g_x, g_y, lut.degree) @ lut.coeffs.T


def test_all_flat_samples_rank_deficient(camera):
    flat = np.full((camera.height, camera.width), 0.02)
    rgb = np.full((camera.height, camera.width, 3), 0.4)
    with pytest.raises(RankDeficient):
        calibrate_lut([(flat, rgb)], degree=2)


def test_noisy_calibration_residual_near_sigma(camera, sphere_sdf, background):
    true_lut = synthetic_lut((camera.width, camera.height), seed=6)
    rng = np.random.default_rng(7)
    sigma = 0.01
    samples = []
    for values in _calibration_scenes(camera, sphere_sdf, background):
        rgb = _unclamped_eval(true_lut, values) + rng.normal(0, sigma,
                                                             (camera.height, camera.width, 3))
        samples.append((values, rgb))
    fit = calibrate_lut(samples, degree=2)
    assert fit.residual_rms == pytest.approx(sigma, rel=0.2)


def test_lut_file_roundtrip(tmp_path, camera):
    lut = synthetic_lut((camera.width, camera.height), seed=9)
    lut.sensor_id = "gelpad-A"
    lut.calibrated_on = "2026-01-15"
    path = tmp_path / "pad.lut"
    write_lut(lut, path)
    back = read_lut(path)
    assert back.degree == lut.degree
    assert back.image_size == lut.image_size
    assert back.sensor_id == "gelpad-A"
    assert np.allclose(back.coeffs, lut.coeffs, rtol=0, atol=1e-15)
    assert path.read_text().startswith("GELSIM-LUT v1")
