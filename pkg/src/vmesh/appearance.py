"""Reflection-basis appearance model.

Appearance is a diffuse color plus a tinted specular term: four basis
environment cube maps are blended by per-point weights and looked up along the
reflection direction, attenuated by a Fresnel-style LUT indexed by view angle
and metallic. Every renderer in the toolkit shades through this module so the
oracle, the CPU renderer, and the on-disk artifacts agree by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import bilinear_sample, normalize
from .scene import EnvSpec, SceneDescription

N_BASIS = 4
DEFAULT_ENV_EDGE = 512
DEFAULT_LUT_SIZE = 256

# face order: +x, -x, +y, -y, +z, -z; minor axes per major axis, fixed order
FACE_ORDER = ("+x", "-x", "+y", "-y", "+z", "-z")
_MINOR_AXES = {0: (1, 2), 1: (0, 2), 2: (0, 1)}


@dataclass(frozen=True)
class CubeMapSet:
    """Basis environment maps, shape (n_basis, 6, edge, edge, 3) float32."""

    faces: np.ndarray

    def __post_init__(self):
        if self.faces.ndim != 5 or self.faces.shape[1] != 6 or self.faces.shape[4] != 3:
            raise ValueError("CubeMapSet expects (n_basis, 6, edge, edge, 3)")
        if self.faces.shape[2] != self.faces.shape[3]:
            raise ValueError("cube map faces must be square")
        if self.faces.dtype != np.float32:
            raise ValueError("cube map faces must be float32")

    @property
    def n_basis(self) -> int:
        return self.faces.shape[0]

    @property
    def edge(self) -> int:
        return self.faces.shape[2]


@dataclass(frozen=True)
class AttenuationLut:
    """Square attenuation table; u axis is cos(theta), v axis is metallic."""

    table: np.ndarray
    kind: str

    def __post_init__(self):
        if self.table.ndim != 2 or self.table.shape[0] != self.table.shape[1]:
            raise ValueError("attenuation table must be square")
        if self.table.shape[0] < 2:
            raise ValueError("attenuation table needs at least 2 nodes per axis")
        if self.table.dtype != np.float32:
            raise ValueError("attenuation table must be float32")

    @property
    def size(self) -> int:
        return self.table.shape[0]


@dataclass
class MaterialSample:
    """Per-point shading inputs: unit normal plus the 11 material features."""

    normal: np.ndarray    # (..., 3)
    diffuse: np.ndarray   # (..., 3)
    tint: np.ndarray      # (..., 3)
    weights: np.ndarray   # (..., 4)
    metallic: np.ndarray  # (...,)


def reflect(omega_o: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Mirror the outgoing (toward viewer) direction about the normal."""
    d = np.sum(omega_o * normal, axis=-1, keepdims=True)
    return 2.0 * d * normal - omega_o


def _face_and_uv(dirs: np.ndarray):
    """Face index and in-face UV for unit directions; ties pick x before y before z."""
    d = np.asarray(dirs, dtype=np.float64)
    ad = np.abs(d)
    axis = np.argmax(ad, axis=-1)
    major = np.take_along_axis(d, axis[..., None], axis=-1)[..., 0]
    face = axis * 2 + (major < 0)
    baxis = np.choose(axis, [1, 0, 0])
    caxis = np.choose(axis, [2, 2, 1])
    bv = np.take_along_axis(d, baxis[..., None], axis=-1)[..., 0]
    cv = np.take_along_axis(d, caxis[..., None], axis=-1)[..., 0]
    am = np.abs(major)
    u = (bv / am + 1.0) * 0.5
    v = (cv / am + 1.0) * 0.5
    return face, u, v


def _sample_bases(maps: CubeMapSet, dirs: np.ndarray, bases) -> np.ndarray:
    """Sample the given basis indices at unit directions -> (..., len(bases), 3)."""
    face, u, v = _face_and_uv(dirs)
    e = maps.edge
    x = u * e - 0.5
    y = v * e - 0.5
    out = np.zeros(face.shape + (len(bases), 3), dtype=np.float64)
    for f in range(6):
        m = face == f
        if not np.any(m):
            continue
        for bi, b in enumerate(bases):
            out[m, bi, :] = bilinear_sample(maps.faces[b, f], x[m], y[m])
    return out


def sample_cubemap(maps: CubeMapSet, basis: int, direction: np.ndarray) -> np.ndarray:
    """Bilinear cube map fetch for one basis map along a unit direction."""
    if not (0 <= basis < maps.n_basis):
        raise ValueError(f"basis index {basis} out of range")
    return _sample_bases(maps, direction, [basis])[..., 0, :]


def face_texel_dirs(face: int, edge: int) -> np.ndarray:
    """Unit directions at texel centers of one face, shape (edge, edge, 3)."""
    ij = (np.arange(edge, dtype=np.float64) + 0.5) / edge
    u, v = np.meshgrid(ij, ij)            # u runs along width, v along height
    axis = face // 2
    sign = 1.0 if face % 2 == 0 else -1.0
    bax, cax = _MINOR_AXES[axis]
    d = np.zeros((edge, edge, 3), dtype=np.float64)
    d[..., axis] = sign
    d[..., bax] = u * 2.0 - 1.0
    d[..., cax] = v * 2.0 - 1.0
    return normalize(d)


def env_eval(spec: EnvSpec, dirs: np.ndarray) -> np.ndarray:
    """Analytic environment radiance along unit directions."""
    d = np.asarray(dirs, dtype=np.float64)
    if spec.kind == "constant":
        return np.broadcast_to(spec.color, d.shape).copy()
    if spec.kind == "gradient":
        t = np.clip((d[..., spec.axis] + 1.0) * 0.5, 0.0, 1.0)
        return spec.low + t[..., None] * (spec.high - spec.low)
    if spec.kind == "lobe":
        c = np.clip(np.sum(d * spec.direction, axis=-1), 0.0, None)
        return spec.color * np.power(c, spec.power)[..., None]
    raise ValueError(f"unknown env kind '{spec.kind}'")


def bake_env_maps(scene: SceneDescription, edge: int = DEFAULT_ENV_EDGE) -> CubeMapSet:
    """Evaluate the scene's four environment definitions onto cube map faces."""
    if len(scene.env) != N_BASIS:
        raise ValueError(f"scene must define exactly {N_BASIS} environment maps")
    faces = np.zeros((N_BASIS, 6, edge, edge, 3), dtype=np.float32)
    for f in range(6):
        dirs = face_texel_dirs(f, edge)
        for b, spec in enumerate(scene.env):
            faces[b, f] = env_eval(spec, dirs).astype(np.float32)
    return CubeMapSet(faces)


def bake_attenuation_lut(kind: str, size: int = DEFAULT_LUT_SIZE) -> AttenuationLut:
    if kind != "schlick":
        raise ValueError(f"unknown lut kind '{kind}'")
    if size < 2:
        raise ValueError("lut size must be at least 2")
    cos = np.linspace(0.0, 1.0, size)[None, :]
    metal = np.linspace(0.0, 1.0, size)[:, None]
    table = metal + (1.0 - metal) * (1.0 - cos) ** 5
    return AttenuationLut(table=table.astype(np.float32), kind=kind)


def attenuation(lut: AttenuationLut, cos_theta, metallic) -> np.ndarray:
    """Bilinear LUT fetch; exact grid nodes return stored values bit-exactly."""
    n = lut.size - 1
    x = np.clip(np.asarray(cos_theta, dtype=np.float64), 0.0, 1.0) * n
    y = np.clip(np.asarray(metallic, dtype=np.float64), 0.0, 1.0) * n
    return bilinear_sample(lut.table, x, y)


def specular_color(weights: np.ndarray, basis_colors: np.ndarray) -> np.ndarray:
    """Blend basis radiances by per-point weights, clamped to [0, 1]."""
    c = np.sum(np.asarray(weights)[..., None] * basis_colors, axis=-2)
    return np.clip(c, 0.0, 1.0)


def tone_map(c: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] then apply the piecewise sRGB transfer."""
    c = np.clip(c, 0.0, 1.0)
    hi = 1.055 * np.power(c, 1.0 / 2.4) - 0.055
    out = np.where(c <= 0.0031308, c * 12.92, hi)
    # the encode polynomial misses the exact endpoint by an ulp at c == 1
    return np.clip(np.where(c >= 1.0, 1.0, out), 0.0, 1.0)


def shade(mat: MaterialSample, omega_o: np.ndarray, maps: CubeMapSet,
          lut: AttenuationLut) -> np.ndarray:
    """Tone-mapped color of one sample: diffuse plus tinted attenuated specular."""
    n = mat.normal
    cos_theta = np.clip(np.sum(omega_o * n, axis=-1), 0.0, 1.0)
    wr = reflect(omega_o, n)
    basis = _sample_bases(maps, wr, list(range(maps.n_basis)))
    spec = specular_color(mat.weights, basis)
    a = attenuation(lut, cos_theta, mat.metallic)
    return tone_map(mat.diffuse + mat.tint * (a[..., None] * spec))
