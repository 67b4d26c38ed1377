"""Geometry, camera, and image metric checks with independently computed values."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmesh.core import (
    Aabb,
    CameraPose,
    ImageRGBA,
    Ray,
    bilinear_sample,
    camera_ray,
    camera_rays,
    load_camera_path,
    orbit_cameras,
    psnr,
    ray_box_intersect,
    ray_box_intersect_many,
    read_image_png,
    save_camera_path,
    vec3,
    write_image_png,
)

UNIT_BOX = Aabb(vec3(-1, -1, -1), vec3(1, 1, 1))


def test_ray_box_front_hit():
    r = Ray(vec3(-3, 0, 0), vec3(1, 0, 0))
    assert ray_box_intersect(r, UNIT_BOX) == (2.0, 4.0)


def test_ray_box_origin_inside_clamps_to_zero():
    r = Ray(vec3(0.25, 0, 0), vec3(0, 0, 1))
    t0, t1 = ray_box_intersect(r, UNIT_BOX)
    assert t0 == 0.0
    assert t1 == pytest.approx(1.0)


def test_ray_box_miss_returns_none():
    r = Ray(vec3(-3, 2.5, 0), vec3(1, 0, 0))
    assert ray_box_intersect(r, UNIT_BOX) is None


def test_ray_box_behind_origin_returns_none():
    r = Ray(vec3(3, 0, 0), vec3(1, 0, 0))
    assert ray_box_intersect(r, UNIT_BOX) is None


def test_ray_box_parallel_inside_slab():
    r = Ray(vec3(-5, 0.5, 0.5), vec3(1, 0, 0))
    t0, t1 = ray_box_intersect(r, UNIT_BOX)
    assert (t0, t1) == (4.0, 6.0)


def test_ray_box_batch_matches_scalar():
    rng = np.random.default_rng(7)
    dirs = rng.normal(size=(64, 3))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    origin = vec3(0.3, -2.2, 0.1)
    hit, t0, t1 = ray_box_intersect_many(origin, dirs, UNIT_BOX)
    for i in range(64):
        single = ray_box_intersect(Ray(origin, dirs[i]), UNIT_BOX)
        if single is None:
            assert not hit[i]
        else:
            assert hit[i]
            assert single[0] == pytest.approx(t0[i], abs=1e-12)
            assert single[1] == pytest.approx(t1[i], abs=1e-12)


def test_camera_ray_edge_pixel_frustum_geometry():
    # fov 90, square image: the image edge subtends 45 degrees; the last pixel
    # center sits half a texel inside, so tan(angle) = 1 - 1/W exactly.
    w = 64
    cam = CameraPose(vec3(0, 0, 0), vec3(0, 0, 1), vec3(0, 1, 0), 90.0, w, w)
    ray = camera_ray(cam, w - 1, w / 2 - 0.5)
    expected = np.array([1.0 - 1.0 / w, 0.0, 1.0])
    expected /= np.linalg.norm(expected)
    np.testing.assert_allclose(ray.direction, expected, atol=1e-12)


def test_camera_ray_center_points_forward():
    cam = CameraPose(vec3(1, 2, -4), vec3(1, 2, 5), vec3(0, 1, 0), 60.0, 32, 32)
    ray = camera_ray(cam, 15.5, 15.5)
    np.testing.assert_allclose(ray.direction, [0, 0, 1], atol=1e-12)
    np.testing.assert_allclose(ray.origin, [1, 2, -4])


def test_camera_rays_agree_with_single_rays():
    cam = CameraPose(vec3(2, 1, -3), vec3(0, 0, 0), vec3(0, 1, 0), 50.0, 8, 6)
    origin, dirs = camera_rays(cam)
    np.testing.assert_allclose(origin, cam.position)
    for px, py in [(0, 0), (7, 5), (3, 2)]:
        np.testing.assert_allclose(dirs[py, px], camera_ray(cam, px, py).direction,
                                   atol=1e-14)


def test_camera_ray_rejects_out_of_range():
    cam = CameraPose(vec3(0, 0, -2), vec3(0, 0, 0), vec3(0, 1, 0), 45.0, 4, 4)
    with pytest.raises(ValueError):
        camera_ray(cam, 4, 0)
    with pytest.raises(ValueError):
        camera_ray(cam, 0, -1)


@pytest.mark.parametrize("kwargs", [
    dict(position=vec3(0, 0, 0), look_at=vec3(0, 0, 0)),
    dict(up=vec3(0, 0, 1)),          # parallel to view direction
    dict(fov_deg=0.0),
    dict(fov_deg=180.0),
    dict(width=0),
])
def test_camera_validation(kwargs):
    base = dict(position=vec3(0, 0, -2), look_at=vec3(0, 0, 0), up=vec3(0, 1, 0),
                fov_deg=45.0, width=8, height=8)
    base.update(kwargs)
    with pytest.raises(ValueError):
        CameraPose(**base)


def test_ray_requires_nonzero_direction():
    with pytest.raises(ValueError):
        Ray(vec3(0, 0, 0), vec3(0, 0, 0))


def test_aabb_requires_min_below_max():
    with pytest.raises(ValueError):
        Aabb(vec3(0, 0, 0), vec3(1, -1, 1))


def test_psnr_identical_hits_cap():
    img = ImageRGBA(np.random.default_rng(0).random((8, 8, 4)))
    assert psnr(img, img) == 99.0


def test_psnr_uniform_offset_single_channel():
    # MSE over RGB = 0.1^2 / 3, so PSNR = 10*log10(300)
    a = ImageRGBA(np.zeros((16, 16, 4)))
    data = np.zeros((16, 16, 4))
    data[..., 0] = 0.1
    b = ImageRGBA(data)
    assert psnr(a, b) == pytest.approx(10.0 * math.log10(300.0), abs=1e-9)


def test_psnr_dimension_mismatch():
    with pytest.raises(ValueError):
        psnr(ImageRGBA(np.zeros((4, 4, 4))), ImageRGBA(np.zeros((4, 5, 4))))


def test_psnr_ignores_alpha():
    a = ImageRGBA(np.zeros((4, 4, 4)))
    data = np.zeros((4, 4, 4))
    data[..., 3] = 1.0
    assert psnr(a, ImageRGBA(data)) == 99.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_psnr_symmetric(seed):
    rng = np.random.default_rng(seed)
    a = ImageRGBA(rng.random((4, 4, 4)))
    b = ImageRGBA(rng.random((4, 4, 4)))
    assert psnr(a, b) == pytest.approx(psnr(b, a), abs=1e-12)


def test_bilinear_nodes_exact():
    img = np.array([[1.0, 2.0], [3.0, 5.0]])
    assert bilinear_sample(img, 0, 0) == 1.0
    assert bilinear_sample(img, 1, 0) == 2.0
    assert bilinear_sample(img, 0, 1) == 3.0
    assert bilinear_sample(img, 0.5, 0.5) == pytest.approx(2.75)
    # snapping: a coordinate a hair off a node lands on the node
    assert bilinear_sample(img, 1.0 - 1e-12, 0) == 2.0


def test_bilinear_clamps_at_edges():
    img = np.arange(6, dtype=np.float64).reshape(2, 3)
    assert bilinear_sample(img, -3.0, 0.0) == 0.0
    assert bilinear_sample(img, 5.0, 1.5) == 5.0


def test_image_quantization_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    img = ImageRGBA(rng.random((5, 7, 4)))
    path = tmp_path / "img.png"
    write_image_png(path, img)
    back = read_image_png(path)
    assert back.quantized
    np.testing.assert_array_equal(back.data, img.to_uint8().data)


def test_image_rgba_validation():
    with pytest.raises(ValueError):
        ImageRGBA(np.zeros((4, 4, 3)))
    with pytest.raises(ValueError):
        ImageRGBA(np.zeros((4, 4, 4), dtype=np.float32))


def test_camera_path_round_trip(tmp_path):
    cams = orbit_cameras(count=5, radius=2.5, elevation_deg=20.0, fov_deg=50.0,
                         width=64, height=48)
    path = tmp_path / "orbit.campath"
    save_camera_path(path, cams)
    back = load_camera_path(path)
    assert len(back) == 5
    for a, b in zip(cams, back):
        np.testing.assert_array_equal(a.position, b.position)
        np.testing.assert_array_equal(a.look_at, b.look_at)
        assert a.fov_deg == b.fov_deg
        assert (a.width, a.height) == (b.width, b.height)


def test_camera_path_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.campath"
    path.write_text("# header\n0 0 -2 0 0 0 0 1 0 45 64\n")
    with pytest.raises(ValueError, match="bad.campath:2"):
        load_camera_path(path)
    path.write_text("0 0 -2 0 0 0 0 1 0 45 64 nope\n")
    with pytest.raises(ValueError, match=":1"):
        load_camera_path(path)
    path.write_text("\n# only comments\n")
    with pytest.raises(ValueError, match="no camera poses"):
        load_camera_path(path)


def test_orbit_cameras_geometry():
    cams = orbit_cameras(count=20, radius=2.5, elevation_deg=20.0)
    assert len(cams) == 20
    for c in cams:
        assert np.linalg.norm(c.position) == pytest.approx(2.5)
        assert c.position[1] == pytest.approx(2.5 * math.sin(math.radians(20.0)))
        np.testing.assert_array_equal(c.look_at, [0, 0, 0])
