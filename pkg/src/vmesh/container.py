"""Quantized on-disk asset container: OBJ mesh, 8-bit PNGs, JSON manifest.

Every stored map is uint8 with explicit per-channel (lo, hi) ranges in the
manifest. Volume data lives in a 3D data texture of edge D = m_bar * block_b
serialized as z-slices stacked vertically (texel (x, y, z) sits at row
z*D + y, column x); in memory those arrays are indexed [z, y, x, channel].
The occupancy bitfield packs voxel (x, y, z) at bit x + n*(y + n*z), LSB
first within each byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .appearance import AttenuationLut, CubeMapSet
from .core import Aabb
from .mesher import TriMesh, obj_dumps, obj_loads
from .sparsevol import (PSHTable, SparseVolume, _block_coords_from_occupancy,
                        occupancy_from_bytes, psh_lookup)

CONTAINER_VERSION = 1
SIGMA_MAX = 200.0
FACE_ORDER = ("+x", "-x", "+y", "-y", "+z", "-z")
OCCUPANCY_BIT_ORDER = "x + n*(y + n*z), LSB first within each byte"
VOLUME_LAYOUT = "z-slices stacked vertically: texel (x,y,z) at row z*D+y, column x"

MESH_MAP_FILES = {
    "normal": "tex_normal.png",
    "diffuse": "tex_diffuse.png",
    "tint": "tex_tint.png",
    "weights": "tex_weights.png",
    "metallic": "tex_metal.png",
}
VOL_MAP_FILES = {
    "diffuse": "vol_diffuse.png",
    "tint": "vol_tint.png",
    "weights": "vol_weights.png",
    "normal": "vol_normal.png",
    "density_metal": "vol_density_metal.png",
}


class ContainerError(ValueError):
    """Malformed, inconsistent, or unsupported container contents."""


def quantize(values, lo, hi) -> np.ndarray:
    """Map reals to uint8: round(255 * clamp((v - lo) / (hi - lo)))."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if not np.all(hi > lo):
        raise ValueError("quantize needs hi > lo")
    t = np.clip((np.asarray(values, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)
    # floor(x + 0.5) rounds halves up, matching the viewer's rounding
    return np.floor(t * 255.0 + 0.5).astype(np.uint8)


def dequantize(q, lo, hi) -> np.ndarray:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    return lo + np.asarray(q, dtype=np.float64) / 255.0 * (hi - lo)


@dataclass(frozen=True)
class QuantizedMap:
    """uint8 payload plus the per-channel value range it was scaled from."""

    data: np.ndarray  # (H, W) or (H, W, C) or (D, D, D, C) uint8
    lo: np.ndarray    # (C,) float64
    hi: np.ndarray    # (C,) float64

    def __post_init__(self):
        if self.data.dtype != np.uint8:
            raise ValueError("quantized payload must be uint8")
        c = 1 if self.data.ndim == 2 else self.data.shape[-1]
        if self.lo.shape != (c,) or self.hi.shape != (c,):
            raise ValueError("range shape must match channel count")
        if not np.all(self.hi > self.lo):
            raise ValueError("quantized range needs hi > lo")

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[-1]

    def dequantized(self) -> np.ndarray:
        if self.data.ndim == 2:
            return dequantize(self.data, self.lo[0], self.hi[0])
        return dequantize(self.data, self.lo, self.hi)


def quantize_map(values: np.ndarray, lo, hi) -> QuantizedMap:
    values = np.asarray(values, dtype=np.float64)
    c = 1 if values.ndim == 2 else values.shape[-1]
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (c,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (c,)).copy()
    rng_lo = lo[0] if values.ndim == 2 else lo
    rng_hi = hi[0] if values.ndim == 2 else hi
    return QuantizedMap(quantize(values, rng_lo, rng_hi), lo, hi)


def build_volume_maps(packed: SparseVolume, table: PSHTable,
                      sigma_max: float = SIGMA_MAX) -> dict[str, QuantizedMap]:
    """Scatter packed bricks into quantized data textures via their hash slot."""
    if packed.bricks is None:
        raise ValueError("volume must be packed before building maps")
    b = packed.block_b
    d = table.m_bar * b
    slots = psh_lookup(table, packed.block_coords)

    planes = {
        "diffuse": np.zeros((d, d, d, 3)),
        "tint": np.zeros((d, d, d, 3)),
        "weights": np.zeros((d, d, d, 4)),
        "normal": np.zeros((d, d, d, 3)),
        "density_metal": np.zeros((d, d, d, 3)),
    }
    src = {
        "diffuse": packed.bricks["diffuse"],
        "tint": packed.bricks["tint"],
        "weights": packed.bricks["weights"],
        "normal": packed.bricks["normal"] * 0.5 + 0.5,
        "density_metal": np.stack(
            [packed.bricks["density"], packed.bricks["metallic"],
             np.zeros_like(packed.bricks["density"])], axis=-1),
    }
    for name, data in planes.items():
        # bricks index [i, lx, ly, lz, c]; the texture indexes [z, y, x, c]
        swapped = np.transpose(src[name], (0, 3, 2, 1, 4))
        for i, (sx, sy, sz) in enumerate(slots):
            data[sz * b:(sz + 1) * b, sy * b:(sy + 1) * b, sx * b:(sx + 1) * b] \
                = swapped[i]
    ranges = {
        "diffuse": (0.0, 1.0), "tint": (0.0, 1.0), "weights": (0.0, 1.0),
        "normal": (0.0, 1.0),
        "density_metal": ([0.0, 0.0, 0.0], [sigma_max, 1.0, 1.0]),
    }
    return {name: quantize_map(planes[name], *ranges[name]) for name in planes}


@dataclass(eq=False)
class VMeshAssets:
    """Complete baked asset bundle, everything already in the quantized domain."""

    bounds: Aabb
    grid_n: int
    block_b: int
    sigma_max: float
    mesh: TriMesh
    maps: dict[str, QuantizedMap]          # keys = MESH_MAP_FILES
    env: tuple[QuantizedMap, ...]          # 4 strips of shape (6E, E, 3)
    lut: QuantizedMap                      # (L, L)
    lut_kind: str
    occupancy: bytes
    psh: PSHTable | None = None
    vol: dict[str, QuantizedMap] | None = None   # keys = VOL_MAP_FILES
    vol_bounds: Aabb | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    @property
    def n_blocks(self) -> int:
        return 0 if self.psh is None else int((self.psh.hash_table >= 0).sum())

    def occupancy_grid(self) -> np.ndarray:
        if "occ" not in self._cache:
            self._cache["occ"] = occupancy_from_bytes(self.occupancy, self.grid_n)
        return self._cache["occ"]

    def map_values(self, name: str) -> np.ndarray:
        key = "map." + name
        if key not in self._cache:
            self._cache[key] = self.maps[name].dequantized()
        return self._cache[key]

    def vol_values(self, name: str) -> np.ndarray:
        key = "vol." + name
        if key not in self._cache:
            self._cache[key] = self.vol[name].dequantized()
        return self._cache[key]

    def env_set(self) -> CubeMapSet:
        if "env" not in self._cache:
            edge = self.env[0].data.shape[1]
            faces = np.stack([
                strip.dequantized().reshape(6, edge, edge, 3)
                for strip in self.env]).astype(np.float32)
            self._cache["env"] = CubeMapSet(faces=faces)
        return self._cache["env"]

    def lut_table(self) -> AttenuationLut:
        if "lut" not in self._cache:
            self._cache["lut"] = AttenuationLut(
                table=self.lut.dequantized().astype(np.float32), kind=self.lut_kind)
        return self._cache["lut"]

    def manifest(self) -> dict:
        def rng(m: QuantizedMap) -> dict:
            return {"lo": m.lo.tolist(), "hi": m.hi.tolist()}

        def map_entry(fname: str, m: QuantizedMap) -> dict:
            return {"file": fname, "height": m.data.shape[0],
                    "width": m.data.shape[1], "channels": m.channels, **rng(m)}

        grid = {"n": self.grid_n, "block": self.block_b,
                "occupied": int(np.count_nonzero(self.occupancy_grid())),
                "blocks": self.n_blocks,
                "m_bar": 0 if self.psh is None else self.psh.m_bar,
                "r_bar": 0 if self.psh is None else self.psh.r_bar}
        man = {
            "version": CONTAINER_VERSION,
            "kind": "vmesh-container",
            "bounds": {"min": self.bounds.min.tolist(),
                       "max": self.bounds.max.tolist()},
            "grid": grid,
            "sigma_max": self.sigma_max,
            "mesh": {"file": "mesh.obj", "vertices": self.mesh.n_vertices,
                     "triangles": self.mesh.n_triangles},
            "maps": {name: map_entry(MESH_MAP_FILES[name], self.maps[name])
                     for name in MESH_MAP_FILES},
            "env": {"edge": self.env[0].data.shape[1], "count": len(self.env),
                    "face_order": list(FACE_ORDER),
                    "maps": [{"file": f"env_{i}.png", **rng(m)}
                             for i, m in enumerate(self.env)]},
            "lut": {"file": "lut.png", "size": self.lut.data.shape[0],
                    "kind": self.lut_kind, **rng(self.lut)},
            "occupancy": {"file": "occupancy.bin",
                          "bytes": len(self.occupancy),
                          "bit_order": OCCUPANCY_BIT_ORDER},
            "volume": None,
        }
        if self.psh is not None:
            vb = self.vol_bounds
            man["volume"] = {
                "dim": self.psh.m_bar * self.block_b,
                "layout": VOLUME_LAYOUT,
                "offsets_file": "offsets.png",
                "maps": {name: map_entry(VOL_MAP_FILES[name], self.vol[name])
                         for name in VOL_MAP_FILES},
                "bounds": {"min": vb.min.tolist(), "max": vb.max.tolist()},
            }
        return man


def _save_png(path: Path, data: np.ndarray) -> None:
    if data.ndim == 2:
        img = Image.fromarray(data, mode="L")
    elif data.shape[-1] == 3:
        img = Image.fromarray(data, mode="RGB")
    elif data.shape[-1] == 4:
        img = Image.fromarray(data, mode="RGBA")
    else:
        raise ValueError(f"unsupported channel count {data.shape[-1]}")
    img.save(path, format="PNG")


def _load_png(path: Path) -> np.ndarray:
    arr = np.asarray(Image.open(path))
    if arr.dtype != np.uint8:
        raise ContainerError(f"{path.name}: expected 8-bit PNG, got {arr.dtype}")
    return arr


def save_container(assets: VMeshAssets, out_dir) -> list[str]:
    """Write the full container; returns the file names written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = assets.manifest()
    written = ["manifest.json", "mesh.obj", "occupancy.bin"]
    (out / "manifest.json").write_text(
        json.dumps(man, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "mesh.obj").write_text(obj_dumps(assets.mesh), encoding="utf-8")
    (out / "occupancy.bin").write_bytes(assets.occupancy)
    for name, fname in MESH_MAP_FILES.items():
        _save_png(out / fname, assets.maps[name].data)
        written.append(fname)
    for i, strip in enumerate(assets.env):
        _save_png(out / f"env_{i}.png", strip.data)
        written.append(f"env_{i}.png")
    _save_png(out / "lut.png", assets.lut.data)
    written.append("lut.png")
    if assets.psh is not None:
        r = assets.psh.r_bar
        strip = assets.psh.offsets.transpose(2, 1, 0, 3).reshape(r * r, r, 3)
        _save_png(out / "offsets.png", np.ascontiguousarray(strip))
        written.append("offsets.png")
        for name, fname in VOL_MAP_FILES.items():
            d = assets.vol[name].data.shape[0]
            c = assets.vol[name].channels
            _save_png(out / fname,
                      assets.vol[name].data.reshape(d * d, d, c))
            written.append(fname)
    return written


def _require(path: Path) -> Path:
    if not path.is_file():
        raise ContainerError(f"missing payload file: {path.name}")
    return path


def _check_dims(fname: str, arr: np.ndarray, entry: dict) -> None:
    c = 1 if arr.ndim == 2 else arr.shape[-1]
    if (arr.shape[0] != entry["height"] or arr.shape[1] != entry["width"]
            or c != entry["channels"]):
        raise ContainerError(
            f"{fname}: dimension mismatch, manifest says "
            f"{entry['height']}x{entry['width']}x{entry['channels']}, "
            f"file holds {arr.shape}")


def _ranges(entry: dict) -> tuple[np.ndarray, np.ndarray]:
    lo = np.asarray(entry["lo"], dtype=np.float64)
    hi = np.asarray(entry["hi"], dtype=np.float64)
    if not np.all(hi > lo):
        raise ContainerError(f"{entry['file']}: invalid range, hi must exceed lo")
    return lo, hi


def load_container(in_dir) -> VMeshAssets:
    """Load and fully validate a container directory."""
    root = Path(in_dir)
    man_path = _require(root / "manifest.json")
    try:
        man = json.loads(man_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ContainerError(f"manifest.json: invalid JSON ({exc})") from exc
    version = man.get("version")
    if version != CONTAINER_VERSION:
        raise ContainerError(f"unsupported container version: {version!r}")

    bounds = Aabb(np.asarray(man["bounds"]["min"], dtype=np.float64),
                  np.asarray(man["bounds"]["max"], dtype=np.float64))
    grid = man["grid"]
    n, block = int(grid["n"]), int(grid["block"])
    if n <= 0 or block <= 0 or n % block != 0:
        raise ContainerError(f"grid {n} is not a positive multiple of block {block}")

    mesh = obj_loads(_require(root / man["mesh"]["file"]).read_text(encoding="utf-8"))
    if (mesh.n_vertices != man["mesh"]["vertices"]
            or mesh.n_triangles != man["mesh"]["triangles"]):
        raise ContainerError(
            f"{man['mesh']['file']}: mesh counts disagree with manifest")

    maps = {}
    for name in MESH_MAP_FILES:
        entry = man["maps"][name]
        arr = _load_png(_require(root / entry["file"]))
        _check_dims(entry["file"], arr, entry)
        maps[name] = QuantizedMap(arr, *_ranges(entry))

    env_info = man["env"]
    edge = int(env_info["edge"])
    if list(env_info["face_order"]) != list(FACE_ORDER):
        raise ContainerError(f"unsupported cube face order: {env_info['face_order']}")
    env = []
    for entry in env_info["maps"]:
        arr = _load_png(_require(root / entry["file"]))
        if arr.shape != (6 * edge, edge, 3):
            raise ContainerError(
                f"{entry['file']}: dimension mismatch, expected "
                f"{(6 * edge, edge, 3)}, file holds {arr.shape}")
        env.append(QuantizedMap(arr, *_ranges(entry)))

    lut_entry = man["lut"]
    lut_arr = _load_png(_require(root / lut_entry["file"]))
    size = int(lut_entry["size"])
    if lut_arr.shape != (size, size):
        raise ContainerError(
            f"{lut_entry['file']}: dimension mismatch, expected "
            f"{(size, size)}, file holds {lut_arr.shape}")
    lut = QuantizedMap(lut_arr, *_ranges(lut_entry))

    occ_bytes = _require(root / man["occupancy"]["file"]).read_bytes()
    if len(occ_bytes) != man["occupancy"]["bytes"] or \
            len(occ_bytes) != (n * n * n + 7) // 8:
        raise ContainerError("occupancy.bin: size disagrees with manifest grid")
    occ_grid = occupancy_from_bytes(occ_bytes, n)
    popcount = int(np.count_nonzero(occ_grid))
    if popcount != grid["occupied"]:
        raise ContainerError(
            f"occupancy popcount {popcount} disagrees with manifest "
            f"occupied count {grid['occupied']}")

    block_coords = _block_coords_from_occupancy(occ_grid, block)
    if len(block_coords) != grid["blocks"]:
        raise ContainerError(
            f"occupancy spans {len(block_coords)} blocks, manifest says "
            f"{grid['blocks']} (brick coverage mismatch)")

    psh = None
    vol = None
    vol_bounds = None
    if grid["blocks"] > 0:
        vol_info = man.get("volume")
        if not vol_info:
            raise ContainerError("manifest lists blocks but no volume section")
        m_bar, r_bar = int(grid["m_bar"]), int(grid["r_bar"])
        off_arr = _load_png(_require(root / vol_info["offsets_file"]))
        if off_arr.shape != (r_bar * r_bar, r_bar, 3):
            raise ContainerError(
                f"{vol_info['offsets_file']}: dimension mismatch, expected "
                f"{(r_bar * r_bar, r_bar, 3)}, file holds {off_arr.shape}")
        offsets = off_arr.reshape(r_bar, r_bar, r_bar, 3).transpose(2, 1, 0, 3)
        offsets = np.ascontiguousarray(offsets)

        # re-verify injectivity over the blocks implied by occupancy
        probe = PSHTable(m_bar=m_bar, r_bar=r_bar, offsets=offsets,
                         hash_table=np.full((m_bar,) * 3, -1, dtype=np.int32))
        slots = psh_lookup(probe, block_coords)
        lin = (slots[:, 0] * m_bar + slots[:, 1]) * m_bar + slots[:, 2]
        if len(np.unique(lin)) != len(lin):
            raise ContainerError(
                "offset table is not injective over the occupied blocks")
        hash_table = np.full((m_bar,) * 3, -1, dtype=np.int32)
        hash_table.ravel()[lin] = np.arange(len(lin), dtype=np.int32)
        psh = PSHTable(m_bar=m_bar, r_bar=r_bar, offsets=offsets,
                       hash_table=hash_table)

        d = m_bar * block
        if int(vol_info["dim"]) != d:
            raise ContainerError(
                f"volume dim {vol_info['dim']} disagrees with m_bar*block {d}")
        vol = {}
        for name in VOL_MAP_FILES:
            entry = vol_info["maps"][name]
            arr = _load_png(_require(root / entry["file"]))
            c = int(entry["channels"])
            if arr.shape != (d * d, d, c) and not (c == 1 and arr.shape == (d * d, d)):
                raise ContainerError(
                    f"{entry['file']}: dimension mismatch, expected "
                    f"{(d * d, d, c)}, file holds {arr.shape}")
            vol[name] = QuantizedMap(arr.reshape(d, d, d, c), *_ranges(entry))
        vb = vol_info["bounds"]
        vol_bounds = Aabb(np.asarray(vb["min"], dtype=np.float64),
                          np.asarray(vb["max"], dtype=np.float64))

    assets = VMeshAssets(
        bounds=bounds, grid_n=n, block_b=block,
        sigma_max=float(man["sigma_max"]), mesh=mesh, maps=maps,
        env=tuple(env), lut=lut, lut_kind=lut_entry["kind"],
        occupancy=occ_bytes, psh=psh, vol=vol, vol_bounds=vol_bounds)
    return assets


def validate_assets(assets: VMeshAssets) -> list[str]:
    """Invariant sweep over in-memory assets; returns failure descriptions."""
    problems = []
    occ = assets.occupancy_grid()
    if assets.psh is not None:
        coords = _block_coords_from_occupancy(occ, assets.block_b)
        slots = psh_lookup(assets.psh, coords)
        m = assets.psh.m_bar
        lin = (slots[:, 0] * m + slots[:, 1]) * m + slots[:, 2]
        if len(np.unique(lin)) != len(lin):
            problems.append("perfect hash collides over occupied blocks")
        else:
            mapped = assets.psh.hash_table.ravel()[lin]
            if np.any(mapped < 0):
                problems.append("occupied block hashes to an empty slot")
        # every voxel with stored density must lie inside an occupied block's slot
        dens = assets.vol["density_metal"].data[..., 0]
        slot_mask = np.zeros((m, m, m), dtype=bool)
        slot_mask[slots[:, 0], slots[:, 1], slots[:, 2]] = True
        b = assets.block_b
        vox_mask = np.repeat(np.repeat(np.repeat(
            slot_mask.transpose(2, 1, 0), b, axis=0), b, axis=1), b, axis=2)
        if np.any(dens[~vox_mask] > 0):
            problems.append("volume density stored outside assigned hash slots")
    elif int(np.count_nonzero(occ)) > 0:
        problems.append("occupancy has voxels set but no volume payload exists")
    for name, qm in assets.maps.items():
        if not np.all(qm.hi > qm.lo):
            problems.append(f"map {name}: degenerate quantization range")
    return problems
