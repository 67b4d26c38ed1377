"""Shading oracles: reflection, tone map, attenuation LUT, cube map sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _util import scene_text
from vmesh.appearance import (
    AttenuationLut,
    CubeMapSet,
    MaterialSample,
    attenuation,
    bake_attenuation_lut,
    bake_env_maps,
    env_eval,
    face_texel_dirs,
    reflect,
    sample_cubemap,
    shade,
    specular_color,
    tone_map,
)
from vmesh.core import normalize, vec3
from vmesh.scene import parse_scene


def test_reflect_known_example():
    wo = normalize(vec3(0, 1, 1))
    n = vec3(0, 0, 1)
    r = reflect(wo, n)
    s = math.sqrt(2.0) / 2.0
    np.testing.assert_allclose(r, [0, -s, s], atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reflect_involution_preserves_length(seed):
    rng = np.random.default_rng(seed)
    wo = normalize(rng.normal(size=3))
    n = normalize(rng.normal(size=3))
    r = reflect(wo, n)
    assert np.linalg.norm(r) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(reflect(r, n), wo, atol=1e-12)


def test_tone_map_srgb_branches():
    assert tone_map(0.5) == pytest.approx(1.055 * 0.5 ** (1 / 2.4) - 0.055, abs=1e-12)
    assert tone_map(0.001) == pytest.approx(12.92 * 0.001, abs=1e-15)
    assert tone_map(2.0) == 1.0  # clamps before encoding
    assert tone_map(-1.0) == 0.0
    arr = tone_map(np.array([0.0, 0.0031308, 1.0]))
    assert arr[0] == 0.0
    assert arr[1] == pytest.approx(12.92 * 0.0031308, abs=1e-12)
    assert arr[2] == pytest.approx(1.0, abs=1e-12)


def test_schlick_lut_values():
    lut = bake_attenuation_lut("schlick", size=256)
    assert lut.table.shape == (256, 256)
    # m=0 row: pure fresnel rolloff, cos=0.5 gives (1/2)^5.
    # tolerance is the bilinear-interp bound for (1-x)^5 at 256 nodes
    assert attenuation(lut, 0.5, 0.0) == pytest.approx(0.03125, abs=4e-5)
    # cos=1: attenuation equals m up to float32 storage
    assert attenuation(lut, 1.0, 0.04) == pytest.approx(0.04, abs=1e-8)
    # grazing: full reflectance regardless of m
    assert attenuation(lut, 0.0, 0.3) == pytest.approx(1.0, abs=1e-12)


def test_lut_node_samples_bit_exact():
    lut = bake_attenuation_lut("schlick", size=64)
    cos = 17 / 63
    m = 40 / 63
    direct = np.float32(m + (1.0 - m) * (1.0 - cos) ** 5)
    assert float(attenuation(lut, cos, m)) == float(direct)


def test_lut_out_of_range_clamps():
    lut = bake_attenuation_lut("schlick", size=32)
    assert attenuation(lut, 1.5, 0.0) == attenuation(lut, 1.0, 0.0)
    assert attenuation(lut, -0.5, 1.0) == attenuation(lut, 0.0, 1.0)


ENV_CONSTS = """  env {
    map 0 constant 0.25 0.5 0.75
    map 1 constant 1 0 0
    map 2 constant 0 1 0
    map 3 constant 0 0 1
  }"""


def test_constant_env_constant_everywhere():
    sc = parse_scene(scene_text(surface="primitive sphere center 0 0 0 radius 1",
                                env=ENV_CONSTS))
    maps = bake_env_maps(sc, edge=8)
    assert maps.faces.shape == (4, 6, 8, 8, 3)
    np.testing.assert_allclose(
        maps.faces[0], np.broadcast_to([0.25, 0.5, 0.75], (6, 8, 8, 3)), atol=1e-7)
    rng = np.random.default_rng(7)
    dirs = normalize(rng.normal(size=(50, 3)))
    got = sample_cubemap(maps, 0, dirs)
    np.testing.assert_allclose(got, np.broadcast_to([0.25, 0.5, 0.75], (50, 3)),
                               atol=1e-6)


def test_lobe_center_texel_exact():
    sc = parse_scene(scene_text(
        surface="primitive sphere center 0 0 0 radius 1",
        env="""  env {
    map 0 lobe dir 0 0 1 power 8 color 1 1 1
    map 1 constant 0 0 0
    map 2 constant 0 0 0
    map 3 constant 0 0 0
  }"""))
    maps = bake_env_maps(sc, edge=3)
    # center texel of the +z face looks exactly along +z: max(0, 1)^8 = 1
    np.testing.assert_allclose(maps.faces[0, 4, 1, 1], [1, 1, 1], atol=1e-7)
    # center texel of -z face: dot = -1, clamped to 0
    np.testing.assert_allclose(maps.faces[0, 5, 1, 1], [0, 0, 0], atol=1e-12)
    got = sample_cubemap(maps, 0, vec3(0, 0, 1))
    np.testing.assert_allclose(got, [1, 1, 1], atol=1e-7)


def test_gradient_env_follows_axis():
    spec_dirs = np.array([[0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
    sc = parse_scene(scene_text(
        surface="primitive sphere center 0 0 0 radius 1",
        env="""  env {
    map 0 gradient axis y low 0 0 0 high 1 1 1
    map 1 constant 0 0 0
    map 2 constant 0 0 0
    map 3 constant 0 0 0
  }"""))
    vals = env_eval(sc.env[0], spec_dirs)
    np.testing.assert_allclose(vals[0], [1, 1, 1], atol=1e-12)
    np.testing.assert_allclose(vals[1], [0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(vals[2], [0.5, 0.5, 0.5], atol=1e-12)


def test_face_texel_dirs_round_trip():
    # every texel direction must sample back its own texel value
    sc = parse_scene(scene_text(
        surface="primitive sphere center 0 0 0 radius 1",
        env="""  env {
    map 0 gradient axis x low 0 0 0 high 1 0.5 0.25
    map 1 constant 0 0 0
    map 2 constant 0 0 0
    map 3 constant 0 0 0
  }"""))
    maps = bake_env_maps(sc, edge=16)
    for face in range(6):
        dirs = face_texel_dirs(face, 16)
        got = sample_cubemap(maps, 0, dirs.reshape(-1, 3)).reshape(16, 16, 3)
        np.testing.assert_allclose(got, maps.faces[0, face], atol=1e-5)


def test_cubemap_tie_direction_picks_first_axis():
    sc = parse_scene(scene_text(surface="primitive sphere center 0 0 0 radius 1",
                                env=ENV_CONSTS))
    maps = bake_env_maps(sc, edge=4)
    # (1,1,1): |x|=|y|=|z| ties resolve to x; u=v=1 lands on the texel corner
    got = sample_cubemap(maps, 1, normalize(vec3(1, 1, 1)))
    np.testing.assert_allclose(got, [1, 0, 0], atol=1e-6)


def test_specular_color_mixes_and_clamps():
    basis = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0],
                      [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]])
    w = np.array([0.5, 0.5, 0.0, 0.0])
    np.testing.assert_allclose(specular_color(w, basis), [0.5, 0.5, 0.0])
    w_hot = np.array([2.0, 0.0, 0.0, 2.0])
    np.testing.assert_allclose(specular_color(w_hot, basis), [1.0, 1.0, 1.0])


def _flat_material(n, diffuse, tint, weights, metallic):
    shape = np.broadcast_to(diffuse, (n, 3)).copy()
    return MaterialSample(
        normal=np.broadcast_to(vec3(0, 0, 1), (n, 3)).copy(),
        diffuse=shape,
        tint=np.broadcast_to(tint, (n, 3)).copy(),
        weights=np.broadcast_to(weights, (n, 4)).copy(),
        metallic=np.full(n, metallic),
    )


def test_shade_zero_tint_is_tonemapped_diffuse():
    sc = parse_scene(scene_text(surface="primitive sphere center 0 0 0 radius 1",
                                env=ENV_CONSTS))
    maps = bake_env_maps(sc, edge=8)
    lut = bake_attenuation_lut("schlick", size=64)
    mat = _flat_material(5, [0.5, 0.25, 0.0], [0, 0, 0], [1, 0, 0, 0], 0.5)
    wo = np.broadcast_to(vec3(0, 0, 1), (5, 3))
    out = shade(mat, wo, maps, lut)
    np.testing.assert_allclose(out, np.broadcast_to(tone_map(np.array([0.5, 0.25, 0.0])),
                                                    (5, 3)), atol=1e-12)


def test_shade_specular_path_numeric_oracle():
    sc = parse_scene(scene_text(surface="primitive sphere center 0 0 0 radius 1",
                                env=ENV_CONSTS))
    maps = bake_env_maps(sc, edge=8)
    lut = bake_attenuation_lut("schlick", size=256)
    # view straight down the normal: wr == wo == n, cos = 1, attenuation = m
    mat = _flat_material(1, [0.0, 0.0, 0.0], [1, 1, 1], [0, 1, 0, 0], 0.25)
    wo = np.broadcast_to(vec3(0, 0, 1), (1, 3))
    out = shade(mat, wo, maps, lut)
    # basis 1 is constant red; spec = (1,0,0) * 0.25
    np.testing.assert_allclose(out[0], tone_map(np.array([0.25, 0.0, 0.0])), atol=1e-6)


def test_cubemapset_validation():
    with pytest.raises(ValueError):
        CubeMapSet(np.zeros((4, 5, 8, 8, 3), dtype=np.float32))
    with pytest.raises(ValueError):
        CubeMapSet(np.zeros((4, 6, 8, 8, 3)))  # wrong dtype
    with pytest.raises(ValueError):
        AttenuationLut(np.zeros((4, 5), dtype=np.float32), "schlick")
    with pytest.raises(ValueError):
        bake_attenuation_lut("schlick", size=1)
    with pytest.raises(ValueError):
        bake_attenuation_lut("fresnel", size=16)
