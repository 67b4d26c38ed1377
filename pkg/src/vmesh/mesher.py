"""Triangle mesh pipeline: extraction, simplification, UV atlas, texture baking.

The surface is extracted from the analytic signed distance field with
marching cubes, decimated by quadric edge collapse, parametrized into a
deterministic per-triangle block atlas, and baked into texel maps by
evaluating the scene fields at barycentrically recovered surface points.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from skimage import measure

from .fields import field_sample, sdf_eval, sdf_gradient
from .scene import SceneDescription

DEGENERATE_AREA = 1e-12
ATLAS_PAD = 1.5          # texels between triangle corners and block border
ATLAS_DIAGONAL_INSET = 1.0  # texels each half-block triangle retreats from the diagonal
MIN_BLOCK = 5
MAX_BLOCK = 64


class AtlasCapacityError(ValueError):
    """Raised when a mesh has too many triangles for the requested atlas."""

    def __init__(self, atlas_size: int, n_triangles: int, required: int):
        super().__init__(
            f"atlas {atlas_size} cannot hold {n_triangles} triangles; "
            f"smallest sufficient atlas size is {required}")
        self.required = required


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh with optional per-corner UVs in [0,1]^2."""

    vertices: np.ndarray   # (V, 3) float64
    triangles: np.ndarray  # (F, 3) int32
    uvs: np.ndarray | None = None  # (F, 3, 2) float64

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int32).reshape(-1, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle indices out of range")
        if self.uvs is not None:
            uv = np.asarray(self.uvs, dtype=np.float64)
            if uv.shape != (len(t), 3, 2):
                raise ValueError("uvs must be one 2-vector per triangle corner")
            object.__setattr__(self, "uvs", uv)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)


def _compact(vertices: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop vertices not referenced by any face and remap indices."""
    if len(faces) == 0:
        return vertices[:0], faces.astype(np.int32)
    used = np.unique(faces)
    remap = np.full(len(vertices), -1, dtype=np.int32)
    remap[used] = np.arange(len(used), dtype=np.int32)
    return vertices[used], remap[faces]


def marching_cubes(scene: SceneDescription, resolution: int) -> TriMesh:
    """Zero level set of the scene SDF on a (resolution+1)^3 lattice."""
    if resolution < 8:
        raise ValueError("marching cubes resolution must be at least 8")
    lo = scene.bounds.min
    hi = scene.bounds.max
    n = resolution + 1
    axes = [np.linspace(lo[k], hi[k], n) for k in range(3)]
    vol = np.empty((n, n, n), dtype=np.float32)
    yy, zz = np.meshgrid(axes[1], axes[2], indexing="ij")
    for i in range(n):  # one x-slab at a time bounds peak memory
        pts = np.stack([np.full(yy.shape, axes[0][i]), yy, zz], axis=-1)
        vol[i] = sdf_eval(scene, pts.reshape(-1, 3)).reshape(n, n)
    if vol.min() > 0.0 or vol.max() < 0.0:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int32))

    cell = [(hi[k] - lo[k]) / resolution for k in range(3)]
    verts, faces, _, _ = measure.marching_cubes(
        vol, level=0.0, spacing=tuple(cell), allow_degenerate=False)
    verts = verts.astype(np.float64) + lo
    faces = faces.astype(np.int32)

    # orient every face counterclockwise seen from outside (ascending SDF)
    v0 = verts[faces[:, 0]]
    e1 = verts[faces[:, 1]] - v0
    e2 = verts[faces[:, 2]] - v0
    geo = np.cross(e1, e2)
    centroid = (v0 + verts[faces[:, 1]] + verts[faces[:, 2]]) / 3.0
    outward = sdf_gradient(scene, centroid)
    flip = np.sum(geo * outward, axis=-1) < 0.0
    faces[flip] = faces[flip][:, ::-1]

    area = 0.5 * np.linalg.norm(geo, axis=-1)
    faces = faces[area >= DEGENERATE_AREA]
    verts, faces = _compact(verts, faces)
    return TriMesh(verts, faces)


def _face_quadrics(pos: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted plane quadric of each face as a symmetric 10-vector.

    Layout: [a00,a01,a02,a11,a12,a22, b0,b1,b2, c] encoding
    E(x) = x^T A x + 2 b^T x + c for the squared plane distance.
    """
    v0 = pos[faces[:, 0]]
    n = np.cross(pos[faces[:, 1]] - v0, pos[faces[:, 2]] - v0)
    norm = np.linalg.norm(n, axis=-1)
    ok = norm > 0
    unit = np.zeros_like(n)
    unit[ok] = n[ok] / norm[ok, None]
    w = 0.5 * norm
    d = -np.sum(unit * v0, axis=-1)
    q = np.empty((len(faces), 10))
    q[:, 0] = unit[:, 0] * unit[:, 0]
    q[:, 1] = unit[:, 0] * unit[:, 1]
    q[:, 2] = unit[:, 0] * unit[:, 2]
    q[:, 3] = unit[:, 1] * unit[:, 1]
    q[:, 4] = unit[:, 1] * unit[:, 2]
    q[:, 5] = unit[:, 2] * unit[:, 2]
    q[:, 6] = d * unit[:, 0]
    q[:, 7] = d * unit[:, 1]
    q[:, 8] = d * unit[:, 2]
    q[:, 9] = d * d
    return q * w[:, None]


def _quadric_matrices(q: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = np.empty(q.shape[:-1] + (3, 3))
    a[..., 0, 0] = q[..., 0]
    a[..., 0, 1] = a[..., 1, 0] = q[..., 1]
    a[..., 0, 2] = a[..., 2, 0] = q[..., 2]
    a[..., 1, 1] = q[..., 3]
    a[..., 1, 2] = a[..., 2, 1] = q[..., 4]
    a[..., 2, 2] = q[..., 5]
    return a, q[..., 6:9], q[..., 9]


def _quadric_error(q: np.ndarray, x: np.ndarray) -> np.ndarray:
    a, b, c = _quadric_matrices(q)
    ax = np.einsum("...ij,...j->...i", a, x)
    return np.einsum("...i,...i->...", x, ax) + 2.0 * np.sum(b * x, axis=-1) + c


def _collapse_candidates(q: np.ndarray, pu: np.ndarray, pv: np.ndarray
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Optimal collapse position per edge quadric, midpoint/endpoint fallback."""
    a, b, _ = _quadric_matrices(q)
    det = np.linalg.det(a)
    scale = np.maximum(np.abs(a).max(axis=(-2, -1)), 1e-30)
    solvable = np.abs(det) > 1e-10 * scale**3
    x = np.empty_like(pu)
    if solvable.any():
        x[solvable] = np.linalg.solve(a[solvable], -b[solvable, :, None])[..., 0]
    if (~solvable).any():
        cand = np.stack([(pu + pv) * 0.5, pu, pv], axis=1)  # (k, 3, 3)
        errs = _quadric_error(q[:, None, :], cand)
        pick = np.argmin(errs, axis=1)
        x[~solvable] = cand[np.arange(len(q)), pick][~solvable]
    err = _quadric_error(q, x)
    return x, np.maximum(err, 0.0)


def simplify(mesh: TriMesh, face_ratio: float) -> TriMesh:
    """Quadric edge collapse until face count <= face_ratio * original.

    Boundary vertices are locked in place, collapses that flip or
    degenerate a surviving face are rejected, and the heap order is
    deterministic (ties broken by insertion sequence).
    """
    if not 0.0 < face_ratio <= 1.0:
        raise ValueError("face_ratio must be in (0, 1]")
    f0 = mesh.n_triangles
    target = int(math.floor(face_ratio * f0))
    if f0 == 0 or target >= f0:
        return TriMesh(mesh.vertices.copy(), mesh.triangles.copy())

    pos = mesh.vertices.astype(np.float64).copy()
    faces = mesh.triangles.astype(np.int64).copy()
    nv = len(pos)

    quad = np.zeros((nv, 10))
    fq = _face_quadrics(pos, faces)
    for corner in range(3):
        np.add.at(quad, faces[:, corner], fq)

    face_alive = np.ones(f0, dtype=bool)
    vert_alive = np.ones(nv, dtype=bool)
    version = np.zeros(nv, dtype=np.int64)
    adj: list[set[int]] = [set() for _ in range(nv)]
    for fi, (i, j, k) in enumerate(faces):
        adj[i].add(fi)
        adj[j].add(fi)
        adj[k].add(fi)

    # lock endpoints of boundary (or non-manifold) edges
    edge_count: dict[tuple[int, int], int] = {}
    for i, j, k in faces:
        for u, v in ((i, j), (j, k), (k, i)):
            key = (u, v) if u < v else (v, u)
            edge_count[key] = edge_count.get(key, 0) + 1
    locked = np.zeros(nv, dtype=bool)
    for (u, v), cnt in edge_count.items():
        if cnt != 2:
            locked[u] = True
            locked[v] = True

    heap: list[tuple] = []
    push_id = 0

    def push_edges(pairs: list[tuple[int, int]]) -> None:
        nonlocal push_id
        if not pairs:
            return
        us = np.array([p[0] for p in pairs])
        vs = np.array([p[1] for p in pairs])
        x, err = _collapse_candidates(quad[us] + quad[vs], pos[us], pos[vs])
        for idx, (u, v) in enumerate(pairs):
            heapq.heappush(heap, (err[idx], push_id, u, v,
                                  version[u], version[v],
                                  (x[idx, 0], x[idx, 1], x[idx, 2])))
            push_id += 1

    push_edges(sorted(edge_count.keys()))

    def face_verts(fi: int) -> tuple[int, int, int]:
        return int(faces[fi, 0]), int(faces[fi, 1]), int(faces[fi, 2])

    n_faces = f0
    while n_faces > target and heap:
        err, _, u, v, vu, vv, xt = heapq.heappop(heap)
        if not (vert_alive[u] and vert_alive[v]):
            continue
        if version[u] != vu or version[v] != vv:
            continue
        if locked[u] and locked[v]:
            continue
        if locked[v]:
            u, v = v, u  # merge into the locked endpoint
        x = np.array(xt) if not locked[u] else pos[u]

        shared = adj[u] & adj[v]
        if not shared:
            continue
        # link condition: common neighbors must be exactly the shared faces'
        # opposite corners, otherwise the collapse pinches the surface
        def ring(w: int) -> set[int]:
            out: set[int] = set()
            for fi in adj[w]:
                out.update(face_verts(fi))
            out.discard(w)
            return out
        opposite = set()
        for fi in shared:
            opposite.update(face_verts(fi))
        opposite -= {u, v}
        if (ring(u) & ring(v)) - {u, v} != opposite:
            continue

        surviving = list((adj[u] | adj[v]) - shared)
        if surviving:
            tri = faces[surviving]
            before = np.cross(pos[tri[:, 1]] - pos[tri[:, 0]],
                              pos[tri[:, 2]] - pos[tri[:, 0]])
            moved = pos[tri].copy()
            moved[tri == u] = x
            moved[tri == v] = x
            after = np.cross(moved[:, 1] - moved[:, 0], moved[:, 2] - moved[:, 0])
            if (np.sum(before * after, axis=-1) <= 0.0).any():
                continue
            if (0.5 * np.linalg.norm(after, axis=-1) < DEGENERATE_AREA).any():
                continue

        pos[u] = x
        quad[u] = quad[u] + quad[v]
        vert_alive[v] = False
        version[u] += 1
        version[v] += 1
        for fi in shared:
            face_alive[fi] = False
            for w in face_verts(fi):
                adj[w].discard(fi)
            n_faces -= 1
        for fi in list(adj[v]):
            faces[fi][faces[fi] == v] = u
            adj[u].add(fi)
        adj[v].clear()

        neighbors = sorted(ring(u))
        push_edges([(u, w) if u < w else (w, u) for w in neighbors
                    if vert_alive[w]])

    out_faces = faces[face_alive].astype(np.int32)
    verts, out_faces = _compact(pos, out_faces)
    return TriMesh(verts, out_faces)


def _atlas_layout(n_triangles: int, atlas_size: int) -> tuple[int, int]:
    """Block edge length and blocks-per-row for a per-triangle atlas."""
    n_blocks = (n_triangles + 1) // 2
    per_row_min = int(math.ceil(math.sqrt(n_blocks)))
    g = min(atlas_size // max(per_row_min, 1), MAX_BLOCK)
    if g < MIN_BLOCK:
        raise AtlasCapacityError(atlas_size, n_triangles, per_row_min * MIN_BLOCK)
    return g, atlas_size // g


def parametrize(mesh: TriMesh, atlas_size: int) -> TriMesh:
    """Deterministic per-triangle block atlas.

    Each square block holds two triangles mapped to fixed right-triangle
    corners, padded from the block border and inset from the diagonal so
    rasterized coverage never touches across triangles.
    """
    if mesh.uvs is not None:
        raise ValueError("mesh already carries uvs")
    t = mesh.n_triangles
    if t == 0:
        return TriMesh(mesh.vertices.copy(), mesh.triangles.copy(),
                       np.zeros((0, 3, 2)))
    g, per_row = _atlas_layout(t, atlas_size)
    p = ATLAS_PAD
    d = ATLAS_DIAGONAL_INSET
    lower = np.array([[p, p], [g - p - d, p], [p, g - p - d]])
    upper = np.array([[g - p, g - p], [p + d, g - p], [g - p, p + d]])

    idx = np.arange(t)
    block = idx // 2
    origin = np.stack([(block % per_row) * g, (block // per_row) * g],
                      axis=-1)[:, None, :].astype(np.float64)
    local = np.where((idx % 2 == 0)[:, None, None], lower[None], upper[None])
    uvs = (origin + local) / atlas_size
    return TriMesh(mesh.vertices.copy(), mesh.triangles.copy(), uvs)


@dataclass(frozen=True)
class BakedMaps:
    """Float texel maps prior to quantization; normal stored as (n+1)/2."""

    normal: np.ndarray    # (S, S, 3)
    diffuse: np.ndarray   # (S, S, 3)
    tint: np.ndarray      # (S, S, 3)
    weights: np.ndarray   # (S, S, 4)
    metallic: np.ndarray  # (S, S)
    covered: np.ndarray   # (S, S) bool, pre-dilation coverage


def _covered_texels(uvs_tex: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(triangle id, texel x, texel y, barycentric) for all covered texel centers."""
    a = uvs_tex[:, 0]
    b = uvs_tex[:, 1]
    c = uvs_tex[:, 2]
    lo = np.ceil(uvs_tex.min(axis=1) - 0.5).astype(np.int64)
    hi = np.floor(uvs_tex.max(axis=1) - 0.5).astype(np.int64)
    w = np.maximum(hi[:, 0] - lo[:, 0] + 1, 0)
    h = np.maximum(hi[:, 1] - lo[:, 1] + 1, 0)
    counts = w * h
    total = int(counts.sum())
    if total == 0:
        return (np.zeros(0, np.int64), np.zeros((0, 2), np.int64),
                np.zeros((0, 3)))
    tri = np.repeat(np.arange(len(uvs_tex)), counts)
    offs = np.concatenate([[0], np.cumsum(counts)])[:-1]
    local = np.arange(total) - np.repeat(offs, counts)
    ww = np.repeat(w, counts)
    ti = np.repeat(lo[:, 0], counts) + local % np.maximum(ww, 1)
    tj = np.repeat(lo[:, 1], counts) + local // np.maximum(ww, 1)

    pt = np.stack([ti + 0.5, tj + 0.5], axis=-1)
    e0 = b[tri] - a[tri]
    e1 = c[tri] - a[tri]
    denom = e0[:, 0] * e1[:, 1] - e0[:, 1] * e1[:, 0]
    rel = pt - a[tri]
    wb = (rel[:, 0] * e1[:, 1] - rel[:, 1] * e1[:, 0]) / denom
    wc = (e0[:, 0] * rel[:, 1] - e0[:, 1] * rel[:, 0]) / denom
    wa = 1.0 - wb - wc
    inside = (wa >= 0.0) & (wb >= 0.0) & (wc >= 0.0)
    bary = np.stack([wa, wb, wc], axis=-1)[inside]
    return tri[inside], np.stack([ti, tj], axis=-1)[inside], bary


# axial neighbors take precedence over diagonal ones during gutter fill
_DILATE_OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1),
                   (-1, -1), (-1, 1), (1, -1), (1, 1))


def _dilate_once(arrays: list[np.ndarray], covered: np.ndarray) -> np.ndarray:
    s = covered.shape[0]
    new_covered = covered.copy()
    for dj, di in _DILATE_OFFSETS:
        src_j = slice(max(dj, 0), s + min(dj, 0))
        src_i = slice(max(di, 0), s + min(di, 0))
        dst_j = slice(max(-dj, 0), s + min(-dj, 0))
        dst_i = slice(max(-di, 0), s + min(-di, 0))
        fill = np.zeros_like(covered)
        fill[dst_j, dst_i] = covered[src_j, src_i]
        fill &= ~new_covered
        if not fill.any():
            continue
        for arr in arrays:
            arr[dst_j, dst_i][fill[dst_j, dst_i]] = \
                arr[src_j, src_i][fill[dst_j, dst_i]]
        new_covered |= fill
    return new_covered


def bake_textures(mesh: TriMesh, scene: SceneDescription, size: int,
                  dilation_rounds: int = 2) -> BakedMaps:
    """Evaluate scene fields at every covered texel's surface point."""
    if mesh.uvs is None:
        raise ValueError("mesh has no uvs; run parametrize first")
    normal = np.zeros((size, size, 3))
    diffuse = np.zeros((size, size, 3))
    tint = np.zeros((size, size, 3))
    weights = np.zeros((size, size, 4))
    metallic = np.zeros((size, size))
    covered = np.zeros((size, size), dtype=bool)
    if mesh.n_triangles:
        tri, texel, bary = _covered_texels(mesh.uvs * size)
        corners = mesh.vertices[mesh.triangles[tri]]        # (K, 3, 3)
        pts = np.einsum("kc,kcd->kd", bary, corners)
        fs = field_sample(scene, pts)
        tj = texel[:, 1]
        ti = texel[:, 0]
        normal[tj, ti] = (fs.normal + 1.0) * 0.5
        diffuse[tj, ti] = fs.diffuse
        tint[tj, ti] = fs.tint
        weights[tj, ti] = fs.weights
        metallic[tj, ti] = fs.metallic
        covered[tj, ti] = True

    pre_dilation = covered.copy()
    grown = covered
    arrays = [normal, diffuse, tint, weights, metallic[..., None]]
    for _ in range(dilation_rounds):
        grown = _dilate_once(arrays, grown)
    return BakedMaps(normal=normal, diffuse=diffuse, tint=tint,
                     weights=weights, metallic=metallic, covered=pre_dilation)


def obj_dumps(mesh: TriMesh) -> str:
    """OBJ text with v/vt/f records, one vt per face corner, CCW fronts."""
    lines = ["# vmesh surface"]
    for x, y, z in mesh.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    if mesh.uvs is not None:
        for corner_uv in mesh.uvs.reshape(-1, 2):
            lines.append(f"vt {float(corner_uv[0])!r} {float(corner_uv[1])!r}")
        for fi, (i, j, k) in enumerate(mesh.triangles):
            t = 3 * fi
            lines.append(f"f {i + 1}/{t + 1} {j + 1}/{t + 2} {k + 1}/{t + 3}")
    else:
        for i, j, k in mesh.triangles:
            lines.append(f"f {i + 1} {j + 1} {k + 1}")
    return "\n".join(lines) + "\n"


def obj_loads(text: str) -> TriMesh:
    verts: list[list[float]] = []
    uvs: list[list[float]] = []
    face_v: list[list[int]] = []
    face_t: list[list[int]] = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag = parts[0]
        try:
            if tag == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif tag == "vt":
                uvs.append([float(p) for p in parts[1:3]])
            elif tag == "f":
                if len(parts) != 4:
                    raise ValueError("only triangles are supported")
                vi, ti = [], []
                for p in parts[1:]:
                    comp = p.split("/")
                    vi.append(int(comp[0]) - 1)
                    ti.append(int(comp[1]) - 1 if len(comp) > 1 and comp[1] else -1)
                face_v.append(vi)
                face_t.append(ti)
        except (ValueError, IndexError) as exc:
            raise ValueError(f"obj line {ln}: {exc}") from exc
    v = np.array(verts, dtype=np.float64).reshape(-1, 3)
    f = np.array(face_v, dtype=np.int32).reshape(-1, 3)
    uv = None
    if uvs and face_t and all(t >= 0 for row in face_t for t in row):
        uv_arr = np.array(uvs, dtype=np.float64)
        uv = uv_arr[np.array(face_t, dtype=np.int64)]
    return TriMesh(v, f, uv)
