"""Deterministic CPU triangle rasterizer producing per-pixel hit records.

Triangles are projected with the same pinhole model as the ray generator in
core (pixel centers at half-integer offsets), candidates are enumerated from
screen bounding boxes, and the depth test packs (depth, triangle id) into one
integer key so a single scatter-min resolves visibility identically on every
run. Front faces wind counterclockwise in a y-up view plane, which makes
their signed area positive in the y-down pixel frame used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CameraPose
from .mesher import TriMesh

_Z_EPS = 1e-6
_EMPTY_KEY = np.uint64(0xFFFFFFFFFFFFFFFF)
_CHUNK_ROWS = 4_000_000


@dataclass(frozen=True)
class RasterResult:
    """Per-pixel nearest-triangle hits for one camera."""

    covered: np.ndarray  # (H, W) bool
    tri: np.ndarray      # (H, W) int32, -1 where uncovered
    t: np.ndarray        # (H, W) float64 ray parameter, +inf where uncovered
    bary: np.ndarray     # (H, W, 3) perspective-correct barycentrics


def _project(vertices: np.ndarray, cam: CameraPose
             ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vertex pixel coordinates (pixel-center units) and camera depth."""
    right, up, fwd = cam.basis()
    rel = vertices - cam.position
    x = rel @ right
    y = rel @ up
    z = rel @ fwd
    tan_v = math.tan(math.radians(cam.fov_deg) / 2.0)
    tan_h = tan_v * cam.width / cam.height
    safe_z = np.where(np.abs(z) < _Z_EPS, _Z_EPS, z)
    ndc_x = x / (safe_z * tan_h)
    ndc_y = y / (safe_z * tan_v)
    px = (ndc_x + 1.0) * cam.width / 2.0 - 0.5
    py = (1.0 - ndc_y) * cam.height / 2.0 - 0.5
    return np.stack([px, py], axis=-1), z, (tan_h, tan_v)


def rasterize(mesh: TriMesh, cam: CameraPose) -> RasterResult:
    h, w = cam.height, cam.width
    covered = np.zeros((h, w), dtype=bool)
    tri_map = np.full((h, w), -1, dtype=np.int32)
    t_map = np.full((h, w), np.inf)
    bary_map = np.zeros((h, w, 3))
    if mesh.n_triangles == 0:
        return RasterResult(covered, tri_map, t_map, bary_map)

    pix, z, (tan_h, tan_v) = _project(mesh.vertices, cam)
    tris = mesh.triangles
    front = (z[tris] > _Z_EPS).all(axis=-1)

    a = pix[tris[:, 0]]
    b = pix[tris[:, 1]]
    c = pix[tris[:, 2]]
    area2 = ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
             - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    front &= area2 > 1e-12  # backface cull + degenerate reject

    lo = np.ceil(np.minimum(np.minimum(a, b), c)).astype(np.int64)
    hi = np.floor(np.maximum(np.maximum(a, b), c)).astype(np.int64)
    lo = np.maximum(lo, 0)
    hi[:, 0] = np.minimum(hi[:, 0], w - 1)
    hi[:, 1] = np.minimum(hi[:, 1], h - 1)
    counts = np.where(front,
                      np.maximum(hi[:, 0] - lo[:, 0] + 1, 0)
                      * np.maximum(hi[:, 1] - lo[:, 1] + 1, 0), 0)

    best = np.full(h * w, _EMPTY_KEY, dtype=np.uint64)
    inv_z = 1.0 / z
    order = np.arange(len(tris))

    # process triangles in slabs so the candidate expansion stays bounded
    start = 0
    while start < len(tris):
        end = start
        rows = 0
        while end < len(tris) and (rows == 0 or rows + counts[end] <= _CHUNK_ROWS):
            rows += counts[end]
            end += 1
        sel = order[start:end][counts[start:end] > 0]
        start = end
        if len(sel) == 0:
            continue
        n_rows = counts[sel]
        tri_id = np.repeat(sel, n_rows)
        offs = np.concatenate([[0], np.cumsum(n_rows)])[:-1]
        local = np.arange(int(n_rows.sum())) - np.repeat(offs, n_rows)
        bw = np.repeat(hi[sel, 0] - lo[sel, 0] + 1, n_rows)
        pi = np.repeat(lo[sel, 0], n_rows) + local % bw
        pj = np.repeat(lo[sel, 1], n_rows) + local // bw

        pa = a[tri_id]
        e0 = b[tri_id] - pa
        e1 = c[tri_id] - pa
        rel = np.stack([pi - pa[:, 0], pj - pa[:, 1]], axis=-1)
        denom = area2[tri_id]
        wb = (rel[:, 0] * e1[:, 1] - rel[:, 1] * e1[:, 0]) / denom
        wc = (e0[:, 0] * rel[:, 1] - e0[:, 1] * rel[:, 0]) / denom
        wa = 1.0 - wb - wc
        inside = (wa >= 0.0) & (wb >= 0.0) & (wc >= 0.0)
        if not inside.any():
            continue
        tri_id = tri_id[inside]
        pi = pi[inside]
        pj = pj[inside]
        sb = np.stack([wa[inside], wb[inside], wc[inside]], axis=-1)

        iz = np.sum(sb * inv_z[tris[tri_id]], axis=-1)
        depth = (1.0 / iz).astype(np.float32)
        key = (depth.view(np.uint32).astype(np.uint64) << np.uint64(32)
               | tri_id.astype(np.uint64))
        lin = pj * w + pi
        np.minimum.at(best, lin, key)

        win = best[lin] == key
        if win.any():
            persp = sb[win] * inv_z[tris[tri_id[win]]]
            persp /= persp.sum(axis=-1, keepdims=True)
            zi = 1.0 / iz[win].astype(np.float64)
            tri_map[pj[win], pi[win]] = tri_id[win]
            bary_map[pj[win], pi[win]] = persp
            ndc_x = (pi[win] + 0.5) * 2.0 / w - 1.0
            ndc_y = 1.0 - (pj[win] + 0.5) * 2.0 / h
            ray_len = np.sqrt(1.0 + (ndc_x * tan_h) ** 2 + (ndc_y * tan_v) ** 2)
            t_map[pj[win], pi[win]] = zi * ray_len

    covered = best.reshape(h, w) != _EMPTY_KEY
    # a later chunk may have beaten an earlier winner; re-derive the winning
    # triangle only where the stored key says so
    tri_map[~covered] = -1
    t_map[~covered] = np.inf
    win_tri = (best & np.uint64(0xFFFFFFFF)).astype(np.int64).reshape(h, w)
    stale = covered & (tri_map != win_tri)
    if stale.any():
        # resolve rows whose winner was overwritten by a later chunk: rerun
        # those triangles' pixels exactly (rare; bounded by chunk overlaps)
        for pj, pi in zip(*np.nonzero(stale)):
            fid = int(win_tri[pj, pi])
            pa, pb, pc = pix[tris[fid]]
            e0 = pb - pa
            e1 = pc - pa
            denom = e0[0] * e1[1] - e0[1] * e1[0]
            rel = np.array([pi - pa[0], pj - pa[1]])
            wb = (rel[0] * e1[1] - rel[1] * e1[0]) / denom
            wc = (e0[0] * rel[1] - e0[1] * rel[0]) / denom
            sb = np.array([1.0 - wb - wc, wb, wc])
            persp = sb * inv_z[tris[fid]]
            persp /= persp.sum()
            zi = 1.0 / float(np.sum(sb * inv_z[tris[fid]]))
            ndc_x = (pi + 0.5) * 2.0 / w - 1.0
            ndc_y = 1.0 - (pj + 0.5) * 2.0 / h
            ray_len = math.sqrt(1.0 + (ndc_x * tan_h) ** 2 + (ndc_y * tan_v) ** 2)
            tri_map[pj, pi] = fid
            bary_map[pj, pi] = persp
            t_map[pj, pi] = zi * ray_len
    return RasterResult(covered, tri_map, t_map, bary_map)


def rasterize_depth(mesh: TriMesh, cam: CameraPose) -> np.ndarray:
    """Ray-parameter depth map, +inf where the mesh does not cover."""
    return rasterize(mesh, cam).t
