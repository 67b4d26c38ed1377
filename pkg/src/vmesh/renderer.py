"""Deterministic CPU renderer over baked assets, in four passes per frame.

Pass 1-2 computes the per-ray march interval against the volume's bounding
box analytically; pass 3 rasterizes the mesh into a G-buffer and shades it
deferred; pass 4 raymarches the sparse volume through the occupancy bitmap
and perfect hash; compositing treats the mesh as opaque behind the volume.
All arithmetic is plain float64 numpy, so identical inputs render to
bit-identical frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .appearance import MaterialSample, shade
from .container import VMeshAssets
from .core import (CameraPose, bilinear_sample, camera_ray, camera_rays,
                   ray_box_intersect_many)
from .raster import rasterize
from .sparsevol import psh_lookup

_NORMAL_EPS = 1e-6


@dataclass(frozen=True)
class RenderConfig:
    """Marching and compositing knobs; background is premultiplied RGBA."""

    step_scale: float = 0.5
    early_stop: float = 1e-3
    background: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if not 0.0 < self.step_scale <= 1.0:
            raise ValueError("step_scale must lie in (0, 1]")
        if not 0.0 <= self.early_stop < 1.0:
            raise ValueError("early_stop must lie in [0, 1)")
        if len(self.background) != 4:
            raise ValueError("background must be RGBA")


@dataclass(frozen=True)
class GBuffer:
    """Rasterized mesh attributes per pixel, dequantized and ready to shade."""

    covered: np.ndarray   # (H, W) bool
    depth: np.ndarray     # (H, W) ray parameter t, +inf where uncovered
    normal: np.ndarray    # (H, W, 3) decoded unit normal
    features: np.ndarray  # (H, W, 11): diffuse, tint, weights, metallic


def _safe_unit(v: np.ndarray) -> np.ndarray:
    length = np.linalg.norm(v, axis=-1, keepdims=True)
    fallback = np.zeros_like(v)
    fallback[..., 2] = 1.0
    return np.where(length > _NORMAL_EPS, v / np.maximum(length, 1e-300), fallback)


def rasterize_mesh(assets: VMeshAssets, cam: CameraPose) -> GBuffer:
    """Nearest-hit rasterization with bilinear fetches from the baked maps."""
    res = rasterize(assets.mesh, cam)
    h, w = res.covered.shape
    depth = np.where(res.covered, res.t, np.inf)
    normal = np.zeros((h, w, 3))
    normal[..., 2] = 1.0
    features = np.zeros((h, w, 11))
    if not res.covered.any():
        return GBuffer(res.covered, depth, normal, features)

    cov = res.covered
    tri = res.tri[cov]
    bary = res.bary[cov]
    uv = np.einsum("kc,kcd->kd", bary, assets.mesh.uvs[tri])

    def fetch(name: str) -> np.ndarray:
        img = assets.map_values(name)
        x = uv[:, 0] * img.shape[1] - 0.5
        y = uv[:, 1] * img.shape[0] - 0.5
        return bilinear_sample(img, x, y)

    normal[cov] = _safe_unit(fetch("normal") * 2.0 - 1.0)
    features[cov, 0:3] = fetch("diffuse")
    features[cov, 3:6] = fetch("tint")
    features[cov, 6:10] = fetch("weights")
    features[cov, 10] = fetch("metallic")
    return GBuffer(cov, depth, normal, features)


def shade_gbuffer(assets: VMeshAssets, gbuf: GBuffer, dirs: np.ndarray) -> np.ndarray:
    """Deferred shading of covered pixels; uncovered pixels stay black."""
    h, w = gbuf.covered.shape
    color = np.zeros((h, w, 3))
    cov = gbuf.covered
    if not cov.any():
        return color
    feats = gbuf.features[cov]
    mat = MaterialSample(normal=gbuf.normal[cov], diffuse=feats[:, 0:3],
                         tint=feats[:, 3:6], weights=feats[:, 6:10],
                         metallic=feats[:, 10])
    color[cov] = shade(mat, -dirs[cov], assets.env_set(), assets.lut_table())
    return color


def march_interval(assets: VMeshAssets, cam: CameraPose,
                   pixel: tuple[int, int],
                   gbuf: GBuffer | None = None) -> tuple[float, float]:
    """March bounds for one pixel: volume box entry to exit-or-surface.

    Returns (0, 0) when the asset has no volume or the ray misses its box.
    """
    px, py = pixel
    if assets.vol_bounds is None:
        return 0.0, 0.0
    ray = camera_ray(cam, px, py)
    hit, t0, t1 = ray_box_intersect_many(ray.origin, ray.direction[None, :],
                                         assets.vol_bounds)
    if not hit[0]:
        return 0.0, 0.0
    start, end = float(t0[0]), float(t1[0])
    if gbuf is not None and gbuf.covered[py, px]:
        end = min(end, float(gbuf.depth[py, px]))
    if end <= start:
        return 0.0, 0.0
    return start, end


def _vol_shading_arrays(assets: VMeshAssets) -> dict[str, np.ndarray]:
    if "vol.decoded" not in assets._cache:
        dm = assets.vol_values("density_metal")
        assets._cache["vol.decoded"] = {
            "sigma": dm[..., 0],
            "metallic": dm[..., 1],
            "normal": _safe_unit(assets.vol_values("normal") * 2.0 - 1.0),
            "diffuse": assets.vol_values("diffuse"),
            "tint": assets.vol_values("tint"),
            "weights": assets.vol_values("weights"),
        }
    return assets._cache["vol.decoded"]


def _march_rays(assets: VMeshAssets, origin: np.ndarray, dirs: np.ndarray,
                t0: np.ndarray, t1: np.ndarray, cfg: RenderConfig
                ) -> tuple[np.ndarray, np.ndarray]:
    """Uniform midpoint march of a flat ray bundle; premultiplied color + m."""
    n_rays = len(dirs)
    color = np.zeros((n_rays, 3))
    m_vol = np.zeros(n_rays)
    if assets.psh is None or n_rays == 0:
        return color, m_vol

    n = assets.grid_n
    b = assets.block_b
    edge = float(assets.bounds.size[0]) / n
    occ = assets.occupancy_grid()
    vol = _vol_shading_arrays(assets)
    table = assets.psh
    env = assets.env_set()
    lut = assets.lut_table()
    bmin = assets.bounds.min

    length = t1 - t0
    # steps never exceed the configured size; the count covers the interval
    steps = np.maximum(np.ceil(length / (edge * cfg.step_scale)).astype(np.int64), 1)
    delta = length / steps

    idx = np.arange(n_rays)
    d = dirs
    ta = t0
    trans = np.ones(n_rays)
    k = 0
    while len(idx):
        pos = origin + d * (ta + (k + 0.5) * delta)[:, None]
        v = np.clip(((pos - bmin) / edge).astype(np.int64), 0, n - 1)
        inside = occ[v[:, 0], v[:, 1], v[:, 2]]
        if inside.any():
            vi = v[inside]
            block = vi // b
            local = vi - block * b
            slot = psh_lookup(table, block)
            tx = slot[:, 0] * b + local[:, 0]
            ty = slot[:, 1] * b + local[:, 1]
            tz = slot[:, 2] * b + local[:, 2]
            sigma = vol["sigma"][tz, ty, tx]
            alpha = 1.0 - np.exp(-sigma * delta[inside])
            omega = trans[inside] * alpha
            lit = omega > 0.0
            if lit.any():
                sel = (tz[lit], ty[lit], tx[lit])
                mat = MaterialSample(
                    normal=vol["normal"][sel], diffuse=vol["diffuse"][sel],
                    tint=vol["tint"][sel], weights=vol["weights"][sel],
                    metallic=vol["metallic"][sel])
                c = shade(mat, -d[inside][lit], env, lut)
                ray_sel = idx[inside][lit]
                color[ray_sel] += omega[lit, None] * c
                m_vol[ray_sel] += omega[lit]
            trans[inside] = trans[inside] * (1.0 - alpha)
        k += 1
        alive = (k < steps) & (trans > cfg.early_stop)
        if not alive.all():
            idx = idx[alive]
            d = d[alive]
            ta = ta[alive]
            steps = steps[alive]
            delta = delta[alive]
            trans = trans[alive]
    return color, m_vol


def raymarch_volume(assets: VMeshAssets, ray, t_start: float, t_end: float,
                    cfg: RenderConfig) -> tuple[np.ndarray, float]:
    """Single-ray volume march; returns premultiplied RGB and coverage m."""
    if t_end <= t_start:
        return np.zeros(3), 0.0
    color, m = _march_rays(assets, ray.origin, ray.direction[None, :],
                           np.array([t_start]), np.array([t_end]), cfg)
    return color[0], float(m[0])


def composite(c_vol: np.ndarray, m_vol: np.ndarray, c_mesh: np.ndarray,
              covered: np.ndarray, background) -> np.ndarray:
    """Front volume over opaque mesh, background where the mesh is absent."""
    bg = np.asarray(background, dtype=np.float64)
    behind_rgb = np.where(covered[..., None], c_mesh,
                          np.broadcast_to(bg[:3], c_mesh.shape))
    rgb = c_vol + (1.0 - m_vol[..., None]) * behind_rgb
    alpha = np.where(covered, 1.0, m_vol + (1.0 - m_vol) * bg[3])
    return np.concatenate([rgb, alpha[..., None]], axis=-1)


def render_frame(assets: VMeshAssets, cam: CameraPose,
                 cfg: RenderConfig | None = None) -> np.ndarray:
    """Full four-pass render to a premultiplied float RGBA image."""
    cfg = cfg or RenderConfig()
    origin, dirs = camera_rays(cam)
    h, w = dirs.shape[:2]
    gbuf = rasterize_mesh(assets, cam)
    c_mesh = shade_gbuffer(assets, gbuf, dirs)

    c_vol = np.zeros((h, w, 3))
    m_vol = np.zeros((h, w))
    if assets.psh is not None and assets.vol_bounds is not None:
        flat = dirs.reshape(-1, 3)
        hit, t0, t1 = ray_box_intersect_many(origin, flat, assets.vol_bounds)
        t1 = np.minimum(t1, gbuf.depth.reshape(-1))
        active = hit & (t1 > t0)
        if active.any():
            c, m = _march_rays(assets, origin, flat[active],
                               t0[active], t1[active], cfg)
            cf = c_vol.reshape(-1, 3)
            mf = m_vol.reshape(-1)
            cf[active] = c
            mf[active] = m
    return composite(c_vol, m_vol, c_mesh, gbuf.covered, cfg.background)


def frame_to_u8(img: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_frame(img: np.ndarray, path) -> None:
    """Write a float RGBA frame as an 8-bit RGBA PNG."""
    Image.fromarray(frame_to_u8(img), mode="RGBA").save(path, format="PNG")


def render_path(assets: VMeshAssets, cams: list[CameraPose], out_dir,
                cfg: RenderConfig | None = None) -> list[Path]:
    """Render every pose to out_dir/frame_%04d.png; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, cam in enumerate(cams):
        img = render_frame(assets, cam, cfg)
        p = out / f"frame_{i:04d}.png"
        save_frame(img, p)
        paths.append(p)
    return paths


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical images give +inf."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)
