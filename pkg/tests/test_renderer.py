"""Deferred renderer tests: intervals, marching, compositing, output."""

import math

import numpy as np
import pytest

from vmesh.bake import BakeOptions, bake_scene
from vmesh.core import CameraPose, Ray, camera_ray, camera_rays, \
    ray_box_intersect_many
from vmesh.renderer import (GBuffer, RenderConfig, composite, frame_to_u8,
                            march_interval, psnr, rasterize_mesh,
                            raymarch_volume, render_frame, render_path,
                            shade_gbuffer)
from vmesh.scene import parse_scene

from _util import scene_text

SMALL_BAKE = BakeOptions(grid_n=32, block_b=16, mc_resolution=32,
                         face_ratio=0.5, atlas_size=256, env_edge=16,
                         lut_size=32, prune_threshold=0.0)


def eye_cam(width=64, height=64):
    return CameraPose(position=(0.0, 0.6, 2.5), look_at=(0.0, 0.0, 0.0),
                      up=(0.0, 1.0, 0.0), fov_deg=50.0,
                      width=width, height=height)


@pytest.fixture(scope="module")
def hybrid():
    scene = parse_scene(scene_text(
        surface="primitive sphere center -0.4 0 0 radius 0.25",
        volume="blob center 0.4 0.3 0.2 radius 0.12 density 40"))
    assets, _ = bake_scene(scene, SMALL_BAKE,
                           contribution_cameras=[eye_cam()])
    return assets


@pytest.fixture(scope="module")
def mesh_only():
    scene = parse_scene(scene_text(
        surface="primitive sphere center 0 0 0 radius 0.4"))
    assets, _ = bake_scene(scene, SMALL_BAKE,
                           contribution_cameras=[eye_cam()])
    return assets


def box_hit_pixel(assets, cam, want_hit=True):
    """First pixel whose ray does (or does not) cross the volume box."""
    origin, dirs = camera_rays(cam)
    flat = dirs.reshape(-1, 3)
    hit, _, _ = ray_box_intersect_many(origin, flat, assets.vol_bounds)
    matches = np.nonzero(hit == want_hit)[0]
    idx = int(matches[len(matches) // 2])
    return idx % cam.width, idx // cam.width


class TestRenderConfig:
    def test_step_scale_bounds(self):
        with pytest.raises(ValueError):
            RenderConfig(step_scale=0.0)
        with pytest.raises(ValueError):
            RenderConfig(step_scale=1.5)
        RenderConfig(step_scale=1.0)

    def test_early_stop_bounds(self):
        with pytest.raises(ValueError):
            RenderConfig(early_stop=-0.01)
        with pytest.raises(ValueError):
            RenderConfig(early_stop=1.0)

    def test_background_must_be_rgba(self):
        with pytest.raises(ValueError):
            RenderConfig(background=(0.0, 0.0, 0.0))


class TestMarchInterval:
    def test_no_volume_gives_empty_interval(self, mesh_only):
        assert march_interval(mesh_only, eye_cam(), (32, 32)) == (0.0, 0.0)

    def test_matches_box_intersection(self, hybrid):
        cam = eye_cam()
        px, py = box_hit_pixel(hybrid, cam)
        t0, t1 = march_interval(hybrid, cam, (px, py))
        assert t1 > t0 > 0.0
        ray = camera_ray(cam, px, py)
        _, w0, w1 = ray_box_intersect_many(ray.origin, ray.direction[None, :],
                                           hybrid.vol_bounds)
        assert t0 == pytest.approx(float(w0[0]), abs=1e-12)
        assert t1 == pytest.approx(float(w1[0]), abs=1e-12)

    def test_missing_ray_gives_empty_interval(self, hybrid):
        cam = eye_cam()
        px, py = box_hit_pixel(hybrid, cam, want_hit=False)
        assert march_interval(hybrid, cam, (px, py)) == (0.0, 0.0)

    def test_mesh_depth_clamps_exit(self, hybrid):
        cam = eye_cam()
        px, py = box_hit_pixel(hybrid, cam)
        t0, t1 = march_interval(hybrid, cam, (px, py))
        h, w = cam.height, cam.width
        mid = 0.5 * (t0 + t1)
        covered = np.zeros((h, w), dtype=bool)
        covered[py, px] = True
        depth = np.full((h, w), np.inf)
        depth[py, px] = mid
        gbuf = GBuffer(covered, depth, np.zeros((h, w, 3)), np.zeros((h, w, 11)))
        assert march_interval(hybrid, cam, (px, py), gbuf) == (t0, mid)

    def test_surface_in_front_of_box_cancels_march(self, hybrid):
        cam = eye_cam()
        px, py = box_hit_pixel(hybrid, cam)
        t0, _ = march_interval(hybrid, cam, (px, py))
        h, w = cam.height, cam.width
        covered = np.ones((h, w), dtype=bool)
        depth = np.full((h, w), t0 * 0.5)
        gbuf = GBuffer(covered, depth, np.zeros((h, w, 3)), np.zeros((h, w, 11)))
        assert march_interval(hybrid, cam, (px, py), gbuf) == (0.0, 0.0)


class TestRaymarch:
    def test_empty_interval_returns_zeros(self, hybrid):
        ray = Ray(np.array([0.0, 0.0, 3.0]), np.array([0.0, 0.0, -1.0]))
        rgb, m = raymarch_volume(hybrid, ray, 2.0, 2.0, RenderConfig())
        assert np.all(rgb == 0.0) and m == 0.0

    def test_ray_through_blob_accumulates(self, hybrid):
        ray = Ray(np.array([0.4, 0.3, 2.5]), np.array([0.0, 0.0, -1.0]))
        _, t0, t1 = ray_box_intersect_many(ray.origin, ray.direction[None, :],
                                           hybrid.vol_bounds)
        rgb, m = raymarch_volume(hybrid, ray, float(t0[0]), float(t1[0]),
                                 RenderConfig())
        assert 0.3 < m <= 1.0
        assert rgb.min() >= 0.0

    def test_march_deterministic(self, hybrid):
        ray = Ray(np.array([0.4, 0.3, 2.5]), np.array([0.0, 0.0, -1.0]))
        a = raymarch_volume(hybrid, ray, 1.5, 3.5, RenderConfig())
        b = raymarch_volume(hybrid, ray, 1.5, 3.5, RenderConfig())
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]


class TestComposite:
    def test_volume_over_mesh(self):
        c_vol = np.full((1, 1, 3), 0.2)
        m = np.full((1, 1), 0.5)
        c_mesh = np.full((1, 1, 3), 0.6)
        covered = np.ones((1, 1), dtype=bool)
        out = composite(c_vol, m, c_mesh, covered, (0.9, 0.9, 0.9, 0.7))
        assert np.allclose(out[0, 0, :3], 0.2 + 0.5 * 0.6)
        assert out[0, 0, 3] == 1.0

    def test_volume_over_background(self):
        c_vol = np.full((1, 1, 3), 0.2)
        m = np.full((1, 1), 0.5)
        c_mesh = np.zeros((1, 1, 3))
        covered = np.zeros((1, 1), dtype=bool)
        out = composite(c_vol, m, c_mesh, covered, (0.1, 0.2, 0.3, 0.8))
        assert np.allclose(out[0, 0, :3], [0.25, 0.3, 0.35])
        assert out[0, 0, 3] == pytest.approx(0.5 + 0.5 * 0.8)

    def test_transparent_background_alpha(self):
        m = np.array([[0.4]])
        out = composite(np.zeros((1, 1, 3)), m, np.zeros((1, 1, 3)),
                        np.zeros((1, 1), dtype=bool), (0.0, 0.0, 0.0, 0.0))
        assert out[0, 0, 3] == pytest.approx(0.4)


class TestRenderFrame:
    def test_mesh_only_equals_manual_composite(self, mesh_only):
        cam = eye_cam()
        cfg = RenderConfig(background=(0.3, 0.1, 0.2, 1.0))
        img = render_frame(mesh_only, cam, cfg)
        _, dirs = camera_rays(cam)
        gbuf = rasterize_mesh(mesh_only, cam)
        c_mesh = shade_gbuffer(mesh_only, gbuf, dirs)
        h, w = dirs.shape[:2]
        want = composite(np.zeros((h, w, 3)), np.zeros((h, w)), c_mesh,
                         gbuf.covered, cfg.background)
        assert np.array_equal(img, want)

    def test_hybrid_render_deterministic(self, hybrid):
        a = render_frame(hybrid, eye_cam())
        b = render_frame(hybrid, eye_cam())
        assert np.array_equal(a, b)

    def test_output_shape_and_range(self, hybrid):
        img = render_frame(hybrid, eye_cam(width=48, height=36))
        assert img.shape == (36, 48, 4)
        assert img.min() >= 0.0

    def test_volume_contributes_coverage(self, hybrid):
        img = render_frame(hybrid, eye_cam())
        gbuf = rasterize_mesh(hybrid, eye_cam())
        off_mesh_alpha = img[..., 3][~gbuf.covered]
        assert off_mesh_alpha.max() > 0.3


class TestOutput:
    def test_frame_to_u8_rounds_half_up(self):
        img = np.array([[[0.5, 0.0, 1.0, 2.0]]])
        assert np.array_equal(frame_to_u8(img)[0, 0], [128, 0, 255, 255])
        assert frame_to_u8(np.array([[[-0.3]]]))[0, 0, 0] == 0

    def test_render_path_names_frames(self, mesh_only, tmp_path):
        cams = [eye_cam(width=16, height=16)] * 3
        paths = render_path(mesh_only, cams, tmp_path / "frames")
        assert [p.name for p in paths] == \
            ["frame_0000.png", "frame_0001.png", "frame_0002.png"]
        assert all(p.is_file() for p in paths)


class TestPsnr:
    def test_identical_is_infinite(self):
        a = np.random.default_rng(1).random((8, 8, 4))
        assert psnr(a, a.copy()) == math.inf

    def test_known_value(self):
        a = np.zeros((4, 4))
        b = np.full((4, 4), 0.5)
        assert psnr(a, b) == pytest.approx(10.0 * math.log10(1.0 / 0.25))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))
