"""Analytic field evaluation and the brute-force reference renderer.

The scene's surface is a signed distance function (CSG fold over primitives),
its participating medium is a sum of density elements, and materials are
procedural fields. The reference renderer marches pixel rays with dense
uniform sampling and serves as the correctness oracle for the baked pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import appearance
from .appearance import AttenuationLut, CubeMapSet, MaterialSample
from .core import ImageRGBA, Ray, camera_rays, ray_box_intersect_many
from .core import CameraPose
from .scene import DensityElement, MaterialField, SceneDescription, SdfPrimitive

# SDF reported where no surface exists; far outside any sigmoid transition band
EMPTY_SDF = 1.0e6
GRADIENT_STEP = 1.0e-4
REFERENCE_STEPS = 512
BLOB_CUTOFF = 4.0  # gaussian blobs are truncated at cutoff * radius


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    t = np.clip(np.sum((p - a) * ab, axis=-1) / float(np.dot(ab, ab)), 0.0, 1.0)
    closest = a + t[..., None] * ab
    return np.linalg.norm(p - closest, axis=-1)


def _prim_sdf(prim: SdfPrimitive, p: np.ndarray) -> np.ndarray:
    if prim.kind == "sphere":
        return np.linalg.norm(p - prim.center, axis=-1) - prim.radius
    if prim.kind == "box":
        q = np.abs(p - prim.center) - prim.size * 0.5
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside
    if prim.kind == "torus":
        rel = p - prim.center
        ring = np.hypot(rel[..., 0], rel[..., 2]) - prim.radius
        return np.hypot(ring, rel[..., 1]) - prim.tube
    if prim.kind == "capsule":
        return _segment_distance(p, prim.a, prim.b) - prim.radius
    raise ValueError(f"unknown primitive kind '{prim.kind}'")


def sdf_eval(scene: SceneDescription, points) -> np.ndarray:
    """Signed distance of the CSG surface; EMPTY_SDF when the scene has none."""
    p = np.asarray(points, dtype=np.float64)
    d = None
    for prim in scene.surface:
        dp = _prim_sdf(prim, p)
        if d is None:
            d = dp
        elif prim.op == "union":
            d = np.minimum(d, dp)
        elif prim.op == "intersect":
            d = np.maximum(d, dp)
        else:
            d = np.maximum(d, -dp)
    if d is None:
        d = np.full(p.shape[:-1], EMPTY_SDF)
    return d


def density_eval(scene: SceneDescription, points) -> np.ndarray:
    """Total volume density; non-negative, zero outside element supports."""
    p = np.asarray(points, dtype=np.float64)
    sigma = np.zeros(p.shape[:-1], dtype=np.float64)
    for el in scene.volume:
        if el.kind == "blob":
            q = np.linalg.norm(p - el.center, axis=-1) / el.radius
            sigma += el.density * np.exp(-0.5 * q * q) * (q < BLOB_CUTOFF)
        elif el.kind == "curve":
            sigma += el.density * (_segment_distance(p, el.a, el.b) <= el.radius)
        else:
            x = p[..., el.axis]
            sigma += el.density * ((x >= el.lo) & (x <= el.hi))
    return sigma


def _central_gradient(fn, p: np.ndarray, h: float) -> np.ndarray:
    g = np.empty(p.shape, dtype=np.float64)
    for ax in range(3):
        dp = np.zeros(3)
        dp[ax] = h
        g[..., ax] = (fn(p + dp) - fn(p - dp)) / (2.0 * h)
    return g


def sdf_gradient(scene: SceneDescription, points, h: float = GRADIENT_STEP,
                 return_degenerate: bool = False):
    """Normalized central-difference surface normal; +z where degenerate."""
    p = np.asarray(points, dtype=np.float64)
    g = _central_gradient(lambda q: sdf_eval(scene, q), p, h)
    gn = np.linalg.norm(g, axis=-1)
    degenerate = gn < 1e-12
    safe = np.where(degenerate, 1.0, gn)
    n = g / safe[..., None]
    n = np.where(degenerate[..., None], np.array([0.0, 0.0, 1.0]), n)
    if return_degenerate:
        return n, degenerate
    return n


def field_normals(scene: SceneDescription, points, h: float = GRADIENT_STEP) -> np.ndarray:
    """Shading normal field: surface gradient, else density downhill, else +z."""
    p = np.asarray(points, dtype=np.float64)
    n, degenerate = sdf_gradient(scene, p, h, return_degenerate=True)
    if np.any(degenerate) and scene.volume:
        sub = p[degenerate]
        g = _central_gradient(lambda q: density_eval(scene, q), sub, h)
        gn = np.linalg.norm(g, axis=-1)
        ok = gn > 1e-12
        fall = np.where(ok[..., None], -g / np.where(ok, gn, 1.0)[..., None],
                        np.array([0.0, 0.0, 1.0]))
        n[degenerate] = fall
    return n


def material_eval(field: MaterialField, points, channels: int) -> np.ndarray:
    """Evaluate a constant or 3D-checker material field at points."""
    p = np.asarray(points, dtype=np.float64)
    if field.kind == "constant":
        out = np.empty(p.shape[:-1] + (channels,), dtype=np.float64)
        out[:] = field.value
        return out
    cells = np.floor(p * field.scale).astype(np.int64)
    parity = (cells.sum(axis=-1)) & 1
    out = np.where(parity[..., None] == 0, field.value, field.value2)
    return np.broadcast_to(out, p.shape[:-1] + (channels,)).astype(np.float64)


@dataclass
class FieldSample:
    """Everything the appearance model needs at a set of points."""

    sdf: np.ndarray
    density: np.ndarray
    normal: np.ndarray
    diffuse: np.ndarray
    tint: np.ndarray
    weights: np.ndarray
    metallic: np.ndarray

    def material(self) -> MaterialSample:
        return MaterialSample(normal=self.normal, diffuse=self.diffuse,
                              tint=self.tint, weights=self.weights,
                              metallic=self.metallic)


def field_sample(scene: SceneDescription, points) -> FieldSample:
    p = np.asarray(points, dtype=np.float64)
    return FieldSample(
        sdf=sdf_eval(scene, p),
        density=density_eval(scene, p),
        normal=field_normals(scene, p),
        diffuse=material_eval(scene.diffuse, p, 3),
        tint=material_eval(scene.tint, p, 3),
        weights=material_eval(scene.weights, p, 4),
        metallic=material_eval(scene.metallic, p, 1)[..., 0],
    )


def logistic(x, sharpness: float) -> np.ndarray:
    """Numerically stable logistic sigmoid of (sharpness * x)."""
    z = np.asarray(x, dtype=np.float64) * sharpness
    enz = np.exp(-np.abs(z))
    return np.where(z >= 0.0, 1.0 / (1.0 + enz), enz / (1.0 + enz))


def surface_alpha(d0, d1, sharpness: float) -> np.ndarray:
    """Discrete surface opacity between two consecutive signed distances."""
    p0 = logistic(d0, sharpness)
    p1 = logistic(d1, sharpness)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = (p0 - p1) / p0
    return np.where(p0 > 0.0, np.maximum(a, 0.0), 0.0)


def surface_opaque_density(scene: SceneDescription, ray: Ray, t,
                           h: float = GRADIENT_STEP) -> np.ndarray:
    """Opaque density of the surface along a ray, by central differences."""
    t = np.asarray(t, dtype=np.float64)
    phi = lambda tv: logistic(sdf_eval(scene, ray.at(tv)), scene.sharpness)
    dphi = (phi(t + h) - phi(t - h)) / (2.0 * h)
    return np.maximum(-dphi / phi(t), 0.0)


def hybrid_alpha(alpha_surface, alpha_volume) -> np.ndarray:
    """Combined opacity of co-located surface and volume contributions."""
    return 1.0 - (1.0 - np.asarray(alpha_surface)) * (1.0 - np.asarray(alpha_volume))


def volume_render(alphas: np.ndarray, colors: np.ndarray):
    """Front-to-back compositing.

    alphas: (..., S) per-sample opacities, colors: (..., S, 3). Returns
    (rgb, opacity, weights) where weights are transmittance-scaled alphas.
    """
    a = np.clip(np.asarray(alphas, dtype=np.float64), 0.0, 1.0)
    trans = np.cumprod(1.0 - a, axis=-1)
    t_prev = np.concatenate([np.ones_like(trans[..., :1]), trans[..., :-1]], axis=-1)
    w = t_prev * a
    rgb = np.sum(w[..., None] * np.asarray(colors, dtype=np.float64), axis=-2)
    return rgb, np.sum(w, axis=-1), w


def render_reference(scene: SceneDescription, cam: CameraPose,
                     steps: int = REFERENCE_STEPS,
                     maps: CubeMapSet | None = None,
                     lut: AttenuationLut | None = None,
                     chunk: int = 4096) -> ImageRGBA:
    """Brute-force hybrid raymarch of the analytic fields.

    Dense uniform sampling of the ray-box interval: surface opacity from
    consecutive SDF values, volume opacity from density at segment midpoints,
    shading at midpoints. Pixels missing the scene bounds stay transparent.
    """
    if steps < 2:
        raise ValueError("render_reference needs at least 2 samples per ray")
    if maps is None:
        maps = appearance.bake_env_maps(scene)
    if lut is None:
        lut = appearance.bake_attenuation_lut(scene.lut_kind)

    origin, dirs = camera_rays(cam)
    flat_dirs = dirs.reshape(-1, 3)
    hit, t0, t1 = ray_box_intersect_many(origin, flat_dirs, scene.bounds)
    out = np.zeros((cam.height * cam.width, 4), dtype=np.float64)
    rows = np.nonzero(hit & (t1 > t0))[0]
    lin = np.linspace(0.0, 1.0, steps)

    for start in range(0, rows.size, chunk):
        sel = rows[start:start + chunk]
        d = flat_dirs[sel]
        ta = t0[sel]
        tb = t1[sel]
        ts = ta[:, None] + (tb - ta)[:, None] * lin
        pts = origin + ts[..., None] * d[:, None, :]
        sd = sdf_eval(scene, pts)
        a_surf = surface_alpha(sd[:, :-1], sd[:, 1:], scene.sharpness)
        mid_t = 0.5 * (ts[:, :-1] + ts[:, 1:])
        mids = origin + mid_t[..., None] * d[:, None, :]
        delta = (tb - ta) / (steps - 1)
        sigma = density_eval(scene, mids)
        a_vol = 1.0 - np.exp(-sigma * delta[:, None])
        alpha = hybrid_alpha(a_surf, a_vol)

        colors = np.zeros(mids.shape, dtype=np.float64)
        active = alpha > 1e-9
        if np.any(active):
            fs = field_sample(scene, mids[active])
            wo = np.broadcast_to(-d[:, None, :], mids.shape)[active]
            colors[active] = appearance.shade(fs.material(), wo, maps, lut)

        rgb, opacity, _ = volume_render(alpha, colors)
        out[sel, :3] = rgb
        out[sel, 3] = opacity

    return ImageRGBA(out.reshape(cam.height, cam.width, 4))
