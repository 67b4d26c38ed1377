"""Sparse residual volume: voxelize, prune by view contribution, pack, hash.

The density field is averaged into a dense voxel grid, voxels that never
contribute visibly from a camera ring are pruned, survivors are packed into
dense blocks, and block coordinates are indexed with a perfect spatial hash
(a coset offset table that makes the double-mod hash injective).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Aabb, CameraPose, camera_rays, ray_box_intersect_many
from .fields import density_eval, field_normals, material_eval
from .mesher import TriMesh
from .raster import rasterize_depth
from .scene import SceneDescription

DEFAULT_GRID_N = 128
DEFAULT_BLOCK_B = 16
DEFAULT_PRUNE_THRESHOLD = 0.01
SUBSAMPLES_PER_AXIS = 4
BRICK_CHANNELS = ("density", "normal", "diffuse", "tint", "weights", "metallic")
_EARLY_STOP = 1e-3
_PSH_SEED = 0x7A3F


class PshBuildError(RuntimeError):
    """Perfect-hash construction exhausted its size budget."""


@dataclass(frozen=True)
class VoxelGrid:
    """Dense voxel records over the scene bounds, arrays indexed [x, y, z]."""

    bounds: Aabb
    density: np.ndarray   # (n, n, n)
    normal: np.ndarray    # (n, n, n, 3)
    diffuse: np.ndarray   # (n, n, n, 3)
    tint: np.ndarray      # (n, n, n, 3)
    weights: np.ndarray   # (n, n, n, 4)
    metallic: np.ndarray  # (n, n, n)

    @property
    def grid_n(self) -> int:
        return self.density.shape[0]

    @property
    def voxel_edge(self) -> float:
        return float(self.bounds.size[0]) / self.grid_n


@dataclass(frozen=True)
class SparseVolume:
    """Pruned occupancy plus (after packing) per-block dense bricks."""

    grid_n: int
    block_b: int
    bounds: Aabb
    occupied: np.ndarray           # (n, n, n) bool, [x, y, z]
    block_coords: np.ndarray       # (N, 3) int32, sorted by packed key
    bricks: dict[str, np.ndarray] | None = None

    @property
    def n_blocks(self) -> int:
        return len(self.block_coords)

    @property
    def n_occupied(self) -> int:
        return int(np.count_nonzero(self.occupied))


@dataclass(frozen=True)
class PSHTable:
    """Offset-table perfect hash over block coordinates.

    slot(p) = ((p mod m_bar) + (offsets[p mod r_bar] mod r_bar)) mod m_bar
    """

    m_bar: int
    r_bar: int
    offsets: np.ndarray     # (r, r, r, 3) uint8
    hash_table: np.ndarray  # (m, m, m) int32 block index, -1 empty

    def __post_init__(self):
        if self.offsets.shape != (self.r_bar,) * 3 + (3,):
            raise ValueError("offset table shape mismatch")
        if self.offsets.dtype != np.uint8:
            raise ValueError("offsets must be uint8")
        if self.hash_table.shape != (self.m_bar,) * 3:
            raise ValueError("hash table shape mismatch")


def _support_boxes(scene: SceneDescription) -> list[tuple[np.ndarray, np.ndarray]]:
    """World AABBs outside of which every density element is exactly zero."""
    lo_b = scene.bounds.min
    hi_b = scene.bounds.max
    boxes = []
    for el in scene.volume:
        if el.kind == "blob":
            r = 4.0 * el.radius
            lo, hi = el.center - r, el.center + r
        elif el.kind == "curve":
            lo = np.minimum(el.a, el.b) - el.radius
            hi = np.maximum(el.a, el.b) + el.radius
        else:  # slab
            lo, hi = lo_b.copy(), hi_b.copy()
            lo[el.axis] = el.lo
            hi[el.axis] = el.hi
        boxes.append((np.maximum(lo, lo_b), np.minimum(hi, hi_b)))
    return boxes


def voxelize(scene: SceneDescription, grid_n: int) -> VoxelGrid:
    """Average 4x4x4 stratified field samples into per-voxel records."""
    if grid_n < 1:
        raise ValueError("grid_n must be positive")
    n = grid_n
    bmin = scene.bounds.min
    edge = float(scene.bounds.size[0]) / n

    density = np.zeros((n, n, n))
    normal = np.zeros((n, n, n, 3))
    normal[..., 2] = 1.0
    diffuse = np.zeros((n, n, n, 3))
    tint = np.zeros((n, n, n, 3))
    weights = np.zeros((n, n, n, 4))
    metallic = np.zeros((n, n, n))

    support = np.zeros((n, n, n), dtype=bool)
    for lo, hi in _support_boxes(scene):
        i0 = np.clip(np.floor((lo - bmin) / edge).astype(int), 0, n - 1)
        i1 = np.clip(np.ceil((hi - bmin) / edge).astype(int), 1, n)
        support[i0[0]:i1[0], i0[1]:i1[1], i0[2]:i1[2]] = True
    vox = np.argwhere(support)
    if len(vox) == 0:
        return VoxelGrid(scene.bounds, density, normal, diffuse, tint,
                         weights, metallic)

    s = SUBSAMPLES_PER_AXIS
    sub = (np.arange(s) + 0.5) / s
    ox, oy, oz = np.meshgrid(sub, sub, sub, indexing="ij")
    offs = np.stack([ox, oy, oz], axis=-1).reshape(-1, 3)  # (64, 3)

    chunk = max(1, 2_000_000 // len(offs))
    for start in range(0, len(vox), chunk):
        v = vox[start:start + chunk]
        pts = bmin + (v[:, None, :] + offs[None, :, :]) * edge
        flat = pts.reshape(-1, 3)
        dens = density_eval(scene, flat).reshape(len(v), -1)
        density[v[:, 0], v[:, 1], v[:, 2]] = dens.mean(axis=-1)

        total = dens.sum(axis=-1)
        live = total > 0.0
        if not live.any():
            continue
        lv = v[live]
        lpts = pts[live].reshape(-1, 3)
        ld = dens[live]
        norms = field_normals(scene, lpts).reshape(len(lv), -1, 3)
        acc = (norms * ld[..., None]).sum(axis=1)
        length = np.linalg.norm(acc, axis=-1)
        unit = np.where(length[:, None] > 1e-12,
                        acc / np.maximum(length, 1e-300)[:, None],
                        [0.0, 0.0, 1.0])
        normal[lv[:, 0], lv[:, 1], lv[:, 2]] = unit

        inv_total = 1.0 / total[live]
        for field_spec, target, width in ((scene.diffuse, diffuse, 3),
                                          (scene.tint, tint, 3),
                                          (scene.weights, weights, 4)):
            vals = material_eval(field_spec, lpts, width).reshape(len(lv), -1, width)
            target[lv[:, 0], lv[:, 1], lv[:, 2]] = \
                (vals * ld[..., None]).sum(axis=1) * inv_total[:, None]
        mv = material_eval(scene.metallic, lpts, 1).reshape(len(lv), -1)
        metallic[lv[:, 0], lv[:, 1], lv[:, 2]] = (mv * ld).sum(axis=1) * inv_total
    return VoxelGrid(scene.bounds, density, normal, diffuse, tint,
                     weights, metallic)


def positive_density_bounds(grid: VoxelGrid) -> Aabb | None:
    """Tight world AABB of positive-density voxels, snapped to voxel faces."""
    idx = np.argwhere(grid.density > 0.0)
    if len(idx) == 0:
        return None
    edge = grid.voxel_edge
    lo = grid.bounds.min + idx.min(axis=0) * edge
    hi = grid.bounds.min + (idx.max(axis=0) + 1) * edge
    return Aabb(lo, hi)


def compute_contributions(grid: VoxelGrid, cameras: list[CameraPose],
                          mesh: TriMesh | None = None,
                          step_scale: float = 0.5) -> np.ndarray:
    """Max rendering weight (T * alpha) each voxel reaches over all rays.

    Rays march the voxelized density with the same uniform stepping the
    renderer uses, and terminate at the rasterized mesh depth so pruning
    matches what the baked renderer will actually occlude.
    """
    if not cameras:
        raise ValueError("contribution march needs at least one camera")
    n = grid.grid_n
    contrib = np.zeros(n * n * n)
    box = positive_density_bounds(grid)
    if box is None:
        return contrib.reshape(n, n, n)
    edge = grid.voxel_edge
    dens_flat = grid.density.ravel()  # [x, y, z] C-order: z fastest

    for cam in cameras:
        origin, dirs = camera_rays(cam)
        flat_dirs = dirs.reshape(-1, 3)
        hit, t0, t1 = ray_box_intersect_many(origin, flat_dirs, box)
        if mesh is not None and mesh.n_triangles:
            t1 = np.minimum(t1, rasterize_depth(mesh, cam).ravel())
        active = hit & (t1 > t0)
        if not active.any():
            continue
        d = flat_dirs[active]
        ta = t0[active]
        length = t1[active] - ta
        steps = np.maximum(np.ceil(length / (edge * step_scale)).astype(int), 1)
        delta = length / steps
        trans = np.ones(len(d))
        k = 0
        idx = np.arange(len(d))
        while len(idx):
            pos = origin + d * (ta + (k + 0.5) * delta)[:, None]
            vi = ((pos - grid.bounds.min) / edge).astype(np.int64)
            np.clip(vi, 0, n - 1, out=vi)
            sigma = dens_flat[(vi[:, 0] * n + vi[:, 1]) * n + vi[:, 2]]
            alpha = 1.0 - np.exp(-sigma * delta)
            omega = trans * alpha
            pos_mask = omega > 0.0
            if pos_mask.any():
                lin = (vi[pos_mask, 0] * n + vi[pos_mask, 1]) * n + vi[pos_mask, 2]
                np.maximum.at(contrib, lin, omega[pos_mask])
            trans = trans * (1.0 - alpha)
            k += 1
            alive = (k < steps) & (trans > _EARLY_STOP)
            if not alive.all():
                idx = idx[alive]
                d = d[alive]
                ta = ta[alive]
                steps = steps[alive]
                delta = delta[alive]
                trans = trans[alive]
    return contrib.reshape(n, n, n)


def _block_coords_from_occupancy(occupied: np.ndarray, block_b: int) -> np.ndarray:
    vox = np.argwhere(occupied)
    if len(vox) == 0:
        return np.zeros((0, 3), dtype=np.int32)
    blk = vox // block_b
    nb = occupied.shape[0] // block_b
    key = (blk[:, 0] * nb + blk[:, 1]) * nb + blk[:, 2]
    uniq = np.unique(key)
    out = np.empty((len(uniq), 3), dtype=np.int32)
    out[:, 0] = uniq // (nb * nb)
    out[:, 1] = (uniq // nb) % nb
    out[:, 2] = uniq % nb
    return out


def prune(grid: VoxelGrid, contributions: np.ndarray, threshold: float,
          block_b: int = DEFAULT_BLOCK_B) -> SparseVolume:
    """Keep voxels whose max contribution reaches the threshold."""
    if threshold < 0:
        raise ValueError("prune threshold must be non-negative")
    n = grid.grid_n
    if n % block_b != 0:
        raise ValueError("grid_n must be a multiple of block_b")
    occupied = (contributions >= threshold) & (grid.density > 0.0)
    return SparseVolume(grid_n=n, block_b=block_b, bounds=grid.bounds,
                        occupied=occupied,
                        block_coords=_block_coords_from_occupancy(occupied, block_b))


def pack_blocks(sparse: SparseVolume, grid: VoxelGrid) -> SparseVolume:
    """Extract one dense brick per occupied block; pruned voxels are zeroed."""
    b = sparse.block_b
    coords = sparse.block_coords
    ar = np.arange(b)
    gx = coords[:, 0, None, None, None] * b + ar[None, :, None, None]
    gy = coords[:, 1, None, None, None] * b + ar[None, None, :, None]
    gz = coords[:, 2, None, None, None] * b + ar[None, None, None, :]
    keep = sparse.occupied[gx, gy, gz]
    bricks = {}
    for name in BRICK_CHANNELS:
        arr = getattr(grid, name)[gx, gy, gz]
        mask = keep if arr.ndim == 4 else keep[..., None]
        bricks[name] = np.where(mask, arr, 0.0)
    return SparseVolume(grid_n=sparse.grid_n, block_b=b, bounds=sparse.bounds,
                        occupied=sparse.occupied.copy(), block_coords=coords.copy(),
                        bricks=bricks)


def _coprime_r_values(m_bar: int, start: int, upper: int) -> list[int]:
    return [r for r in range(start, upper) if math.gcd(r, m_bar) == 1]


def psh_initial_r(n_blocks: int) -> int:
    """Starting offset-table edge: about one entry per six blocks."""
    return max(2, math.ceil((n_blocks / 6.0) ** (1.0 / 3.0)))


def _try_offsets(coords: np.ndarray, m_bar: int, r_bar: int, seed_tag: int
                 ) -> tuple[np.ndarray, np.ndarray] | None:
    """One greedy construction attempt; None when some bucket cannot place."""
    n_coords = len(coords)
    bases = coords % m_bar
    buckets_key = ((coords[:, 0] % r_bar) * r_bar
                   + coords[:, 1] % r_bar) * r_bar + coords[:, 2] % r_bar

    order = np.argsort(buckets_key, kind="stable")
    sorted_keys = buckets_key[order]
    uniq, starts = np.unique(sorted_keys, return_index=True)
    groups = np.split(order, starts[1:])

    # irresolvable: same bucket and same base can never separate
    for members in groups:
        base_keys = (bases[members, 0] * m_bar
                     + bases[members, 1]) * m_bar + bases[members, 2]
        if len(np.unique(base_keys)) != len(members):
            return None

    rng = np.random.default_rng([_PSH_SEED, seed_tag, m_bar, r_bar, n_coords])
    cand = np.stack(np.meshgrid(*([np.arange(r_bar)] * 3), indexing="ij"),
                    axis=-1).reshape(-1, 3)
    cand = cand[rng.permutation(len(cand))]

    offsets = np.zeros((r_bar, r_bar, r_bar, 3), dtype=np.uint8)
    hash_table = np.full((m_bar, m_bar, m_bar), -1, dtype=np.int32)
    free = np.ones(m_bar ** 3, dtype=bool)

    by_size = sorted(range(len(groups)),
                     key=lambda gi: (-len(groups[gi]), int(uniq[gi])))
    for gi in by_size:
        members = groups[gi]
        base = bases[members]  # (s, 3)
        slots = (base[None, :, :] + cand[:, None, :]) % m_bar  # (C, s, 3)
        lin = (slots[..., 0] * m_bar + slots[..., 1]) * m_bar + slots[..., 2]
        ok = free[lin].all(axis=1)
        pick = int(np.argmax(ok)) if ok.any() else -1
        if pick < 0:
            return None
        phi = cand[pick]
        key = int(uniq[gi])
        bz = key % r_bar
        by = (key // r_bar) % r_bar
        bx = key // (r_bar * r_bar)
        offsets[bx, by, bz] = phi.astype(np.uint8)
        chosen = lin[pick]
        free[chosen] = False
        hash_table.ravel()[chosen] = members
    return offsets, hash_table


def psh_build(block_coords: np.ndarray, domain_blocks: int) -> PSHTable:
    """Construct a perfect hash over the block coordinate set.

    m_bar starts minimal (m_bar^3 >= N); the offset table starts near N/6
    entries and grows (coprime with m_bar) on failed attempts. If every
    r_bar below m_bar fails, m_bar grows within its 8N size budget; offset
    tables larger than m_bar are a documented last resort for degenerate
    tiny sets where no smaller table can separate coset collisions.
    """
    coords = np.asarray(block_coords, dtype=np.int64).reshape(-1, 3)
    n = len(coords)
    if n == 0:
        raise ValueError("psh_build needs at least one block")
    if coords.min() < 0 or coords.max() >= domain_blocks:
        raise ValueError("block coordinates outside the domain")
    keys = (coords[:, 0] * domain_blocks + coords[:, 1]) * domain_blocks \
        + coords[:, 2]
    if len(np.unique(keys)) != n:
        raise ValueError("duplicate block coordinates")

    m_min = 1
    while m_min ** 3 < n:
        m_min += 1
    if n == 1:
        return PSHTable(m_bar=1, r_bar=2,
                        offsets=np.zeros((2, 2, 2, 3), dtype=np.uint8),
                        hash_table=np.zeros((1, 1, 1), dtype=np.int32))

    m_budget = m_min
    while (m_budget + 1) ** 3 <= 8 * n:
        m_budget += 1

    r_start = psh_initial_r(n)
    attempts = []
    for m_bar in range(m_min, m_budget + 1):
        for r_bar in _coprime_r_values(m_bar, r_start, m_bar):
            attempts.append((m_bar, r_bar))
    # last resort: minimal tables cannot separate some coset collisions,
    # so allow offset tables larger than m_bar before giving up
    for m_bar in range(m_min, m_budget + 1):
        for r_bar in _coprime_r_values(m_bar, max(r_start, m_bar + 1),
                                       min(4 * m_bar + 2, 256)):
            attempts.append((m_bar, r_bar))

    for tag, (m_bar, r_bar) in enumerate(attempts):
        built = _try_offsets(coords, m_bar, r_bar, tag)
        if built is not None:
            offsets, hash_table = built
            return PSHTable(m_bar=m_bar, r_bar=r_bar, offsets=offsets,
                            hash_table=hash_table)
    raise PshBuildError(
        f"no perfect hash found for N={n} blocks in domain {domain_blocks}^3 "
        f"(tried m_bar {m_min}..{m_budget})")


def psh_lookup(table: PSHTable, block_coord: np.ndarray) -> np.ndarray:
    """Hash slot for block coordinates of shape (..., 3)."""
    p = np.asarray(block_coord, dtype=np.int64)
    pm = p % table.m_bar
    pr = p % table.r_bar
    phi = table.offsets[pr[..., 0], pr[..., 1], pr[..., 2]].astype(np.int64)
    return (pm + phi % table.r_bar) % table.m_bar


def build_occupancy(sparse: SparseVolume) -> bytes:
    """Pack occupancy bits as x + n*(y + n*z), eight per byte, LSB first."""
    flat = sparse.occupied.transpose(2, 1, 0).reshape(-1)
    return np.packbits(flat, bitorder="little").tobytes()


def occupancy_from_bytes(data: bytes, grid_n: int) -> np.ndarray:
    n = grid_n
    expected = (n * n * n + 7) // 8
    if len(data) != expected:
        raise ValueError(f"occupancy blob must be {expected} bytes, got {len(data)}")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8),
                         bitorder="little")[:n * n * n]
    return bits.reshape(n, n, n).transpose(2, 1, 0).astype(bool)


def occupied_world_bounds(sparse: SparseVolume) -> Aabb | None:
    """Tight world AABB of occupied voxels, snapped to voxel faces."""
    idx = np.argwhere(sparse.occupied)
    if len(idx) == 0:
        return None
    edge = float(sparse.bounds.size[0]) / sparse.grid_n
    lo = sparse.bounds.min + idx.min(axis=0) * edge
    hi = sparse.bounds.min + (idx.max(axis=0) + 1) * edge
    return Aabb(lo, hi)
