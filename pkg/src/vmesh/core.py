"""Vectors, rays, boxes, cameras, images, and the PSNR metric.

Geometry helpers accept numpy arrays of shape (..., 3) so callers can work on
single points or whole pixel grids with the same functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

PSNR_CAP_DB = 99.0


def vec3(x, y, z) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / n


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box; min and max are (3,) float arrays with min < max."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min", np.asarray(self.min, dtype=np.float64))
        object.__setattr__(self, "max", np.asarray(self.max, dtype=np.float64))
        if not np.all(self.min < self.max):
            raise ValueError("Aabb requires min < max on every axis")

    @property
    def size(self) -> np.ndarray:
        return self.max - self.min


@dataclass(frozen=True)
class Ray:
    """Origin plus unit direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64)
        d = np.asarray(self.direction, dtype=np.float64)
        n = np.linalg.norm(d)
        if n == 0.0:
            raise ValueError("ray direction must be nonzero")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d / n)

    def at(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.origin + t[..., None] * self.direction if t.ndim else self.origin + t * self.direction


@dataclass(frozen=True)
class CameraPose:
    """Pinhole camera: position, look-at target, up hint, vertical fov, pixel size."""

    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    fov_deg: float
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "look_at", np.asarray(self.look_at, dtype=np.float64))
        object.__setattr__(self, "up", np.asarray(self.up, dtype=np.float64))
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError("fov must be in (0, 180) degrees")
        fwd = self.look_at - self.position
        if np.linalg.norm(fwd) < 1e-12:
            raise ValueError("camera position and look_at coincide")
        if np.linalg.norm(np.cross(self.up, fwd)) < 1e-12:
            raise ValueError("up vector is parallel to the view direction")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Orthonormal (right, up, forward) with forward toward look_at."""
        fwd = normalize(self.look_at - self.position)
        right = normalize(np.cross(self.up, fwd))
        up = np.cross(fwd, right)
        return right, up, fwd


def ray_box_intersect_many(origin: np.ndarray, dirs: np.ndarray, box: Aabb):
    """Slab intersection for a bundle of rays sharing math with the scalar path.

    Returns (hit, t_near, t_far) where t_near is clamped to 0 (rays starting
    inside the box march from their origin). Zero direction components are
    handled explicitly so rays parallel to a face never produce NaNs.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(dirs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        ta = (box.min - o) * inv
        tb = (box.max - o) * inv
    lo = np.minimum(ta, tb)
    hi = np.maximum(ta, tb)
    zero = d == 0.0
    if np.any(zero):
        inside = (o >= box.min) & (o <= box.max)
        inside = np.broadcast_to(inside, zero.shape)
        lo = np.where(zero, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(zero, np.where(inside, np.inf, -np.inf), hi)
    t_near = np.maximum(lo.max(axis=-1), 0.0)
    t_far = hi.min(axis=-1)
    hit = t_far >= t_near
    return hit, t_near, t_far


def ray_box_intersect(ray: Ray, box: Aabb):
    """Entry/exit parameters of a ray against a box, or None when missed."""
    hit, t0, t1 = ray_box_intersect_many(ray.origin, ray.direction[None, :], box)
    if not hit[0]:
        return None
    return float(t0[0]), float(t1[0])


def _pixel_dirs(cam: CameraPose, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    right, up, fwd = cam.basis()
    tan_v = math.tan(math.radians(cam.fov_deg) / 2.0)
    tan_h = tan_v * cam.width / cam.height
    ndc_x = (px + 0.5) * 2.0 / cam.width - 1.0
    ndc_y = 1.0 - (py + 0.5) * 2.0 / cam.height
    d = (
        ndc_x[..., None] * tan_h * right
        + ndc_y[..., None] * tan_v * up
        + fwd
    )
    return normalize(d)


def camera_ray(cam: CameraPose, px: float, py: float) -> Ray:
    """Ray through the center of pixel (px, py); top-left pixel is (0, 0)."""
    if not (0 <= px < cam.width) or not (0 <= py < cam.height):
        raise ValueError(f"pixel ({px}, {py}) outside {cam.width}x{cam.height} image")
    d = _pixel_dirs(cam, np.asarray(float(px)), np.asarray(float(py)))
    return Ray(cam.position, d)


def camera_rays(cam: CameraPose) -> tuple[np.ndarray, np.ndarray]:
    """Directions for every pixel center, shape (height, width, 3), plus origin."""
    px, py = np.meshgrid(np.arange(cam.width, dtype=np.float64),
                         np.arange(cam.height, dtype=np.float64))
    return cam.position, _pixel_dirs(cam, px, py)


def bilinear_sample(img: np.ndarray, x, y) -> np.ndarray:
    """Bilinear fetch at continuous texel coordinates with edge clamping.

    x runs along width, y along height; integer coordinates address texel
    centers. Coordinates within 1e-9 of a node snap onto it so node queries
    return stored values exactly.
    """
    h, w = img.shape[:2]
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xr = np.round(x)
    yr = np.round(y)
    x = np.where(np.abs(x - xr) < 1e-9, xr, x)
    y = np.where(np.abs(y - yr) < 1e-9, yr, y)
    x = np.clip(x, 0.0, w - 1.0)
    y = np.clip(y, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.int64), max(w - 2, 0))
    y0 = np.minimum(np.floor(y).astype(np.int64), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None] if img.ndim == 3 else (x - x0)
    fy = (y - y0)[..., None] if img.ndim == 3 else (y - y0)
    v00 = img[y0, x0].astype(np.float64)
    v10 = img[y0, x1].astype(np.float64)
    v01 = img[y1, x0].astype(np.float64)
    v11 = img[y1, x1].astype(np.float64)
    top = v00 + (v10 - v00) * fx
    bot = v01 + (v11 - v01) * fx
    return top + (bot - top) * fy


@dataclass
class ImageRGBA:
    """RGBA raster; float64 in [0,1] or uint8, flagged by dtype."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != 4:
            raise ValueError("ImageRGBA expects an (H, W, 4) array")
        if self.data.dtype not in (np.float64, np.uint8):
            raise ValueError("ImageRGBA stores float64 or uint8 pixels")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def quantized(self) -> bool:
        return self.data.dtype == np.uint8

    @classmethod
    def zeros(cls, width: int, height: int) -> "ImageRGBA":
        return cls(np.zeros((height, width, 4), dtype=np.float64))

    def to_float(self) -> "ImageRGBA":
        if not self.quantized:
            return self
        return ImageRGBA(self.data.astype(np.float64) / 255.0)

    def to_uint8(self) -> "ImageRGBA":
        if self.quantized:
            return self
        q = np.clip(np.floor(self.data * 255.0 + 0.5), 0.0, 255.0).astype(np.uint8)
        return ImageRGBA(q)


def write_image_png(path, img: ImageRGBA) -> None:
    Image.fromarray(img.to_uint8().data, mode="RGBA").save(path, format="PNG")


def read_image_png(path) -> ImageRGBA:
    with Image.open(path) as im:
        return ImageRGBA(np.asarray(im.convert("RGBA"), dtype=np.uint8))


def psnr(a: ImageRGBA, b: ImageRGBA) -> float:
    """Peak signal-to-noise ratio over the RGB channels, capped at 99 dB."""
    if a.width != b.width or a.height != b.height:
        raise ValueError("psnr requires images of identical dimensions")
    fa = a.to_float().data[..., :3]
    fb = b.to_float().data[..., :3]
    mse = float(np.mean((fa - fb) ** 2))
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)


def load_camera_path(path) -> list[CameraPose]:
    """Parse a whitespace camera file: px py pz lx ly lz ux uy uz fov w h per line."""
    cams = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 12:
                raise ValueError(f"{path}:{lineno}: expected 12 fields, got {len(parts)}")
            try:
                nums = [float(p) for p in parts]
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from None
            w, h = nums[10], nums[11]
            if w != int(w) or h != int(h):
                raise ValueError(f"{path}:{lineno}: width/height must be integers")
            try:
                cams.append(CameraPose(
                    position=vec3(*nums[0:3]),
                    look_at=vec3(*nums[3:6]),
                    up=vec3(*nums[6:9]),
                    fov_deg=nums[9],
                    width=int(w),
                    height=int(h),
                ))
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from None
    if not cams:
        raise ValueError(f"{path}: no camera poses found")
    return cams


def save_camera_path(path, cams: list[CameraPose]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("# px py pz lx ly lz ux uy uz fov width height\n")
        for c in cams:
            fields = [*c.position, *c.look_at, *c.up, c.fov_deg]
            f.write(" ".join(repr(float(v)) for v in fields))
            f.write(f" {c.width} {c.height}\n")


def orbit_cameras(count: int = 20, radius: float = 2.5, elevation_deg: float = 20.0,
                  fov_deg: float = 50.0, width: int = 256, height: int = 256) -> list[CameraPose]:
    """Horizontal ring of poses looking at the origin, y-up."""
    el = math.radians(elevation_deg)
    cams = []
    for k in range(count):
        az = 2.0 * math.pi * k / count
        pos = vec3(radius * math.cos(el) * math.cos(az),
                   radius * math.sin(el),
                   radius * math.cos(el) * math.sin(az))
        cams.append(CameraPose(pos, vec3(0, 0, 0), vec3(0, 1, 0), fov_deg, width, height))
    return cams
