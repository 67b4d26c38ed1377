"""Bake pipeline: scene description to a complete quantized asset bundle."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .appearance import bake_attenuation_lut, bake_env_maps
from .container import (SIGMA_MAX, VMeshAssets, build_volume_maps, quantize_map)
from .core import orbit_cameras
from .mesher import bake_textures, marching_cubes, parametrize, simplify
from .scene import SceneDescription
from .sparsevol import (build_occupancy, compute_contributions,
                        occupied_world_bounds, pack_blocks, prune, psh_build,
                        voxelize)


@dataclass(frozen=True)
class BakeOptions:
    grid_n: int = 128
    block_b: int = 16
    mc_resolution: int = 256
    face_ratio: float = 0.25
    atlas_size: int = 1024
    env_edge: int = 512
    lut_size: int = 256
    prune_threshold: float = 0.01
    contrib_cameras: int = 20
    contrib_radius: float = 2.5
    contrib_elevation: float = 20.0
    contrib_fov: float = 50.0
    contrib_res: int = 256
    sigma_max: float = SIGMA_MAX

    def __post_init__(self):
        if self.grid_n <= 0 or self.block_b <= 0 or self.grid_n % self.block_b:
            raise ValueError("grid_n must be a positive multiple of block_b")
        if not 0.0 < self.face_ratio <= 1.0:
            raise ValueError("face_ratio must lie in (0, 1]")
        if self.prune_threshold < 0.0:
            raise ValueError("prune_threshold must be non-negative")
        if self.contrib_cameras < 1:
            raise ValueError("need at least one contribution camera")


def bake_scene(scene: SceneDescription, opts: BakeOptions | None = None,
               contribution_cameras=None) -> tuple[VMeshAssets, dict]:
    """Run the full pipeline; returns assets plus stage stats/timings.

    contribution_cameras overrides the default orbit ring used to decide
    which voxels ever matter to a viewer.
    """
    opts = opts or BakeOptions()
    stats: dict = {"timings": {}}

    def stage(name: str, fn):
        t0 = time.perf_counter()
        out = fn()
        stats["timings"][name] = time.perf_counter() - t0
        return out

    mesh = stage("marching_cubes", lambda: marching_cubes(scene, opts.mc_resolution))
    stats["faces_extracted"] = mesh.n_triangles
    mesh = stage("simplify", lambda: simplify(mesh, opts.face_ratio))
    stats["faces_final"] = mesh.n_triangles
    mesh = parametrize(mesh, opts.atlas_size)
    maps = stage("bake_textures",
                 lambda: bake_textures(mesh, scene, opts.atlas_size))

    env = stage("bake_env", lambda: bake_env_maps(scene, opts.env_edge))
    lut = bake_attenuation_lut(scene.lut_kind, opts.lut_size)

    grid = stage("voxelize", lambda: voxelize(scene, opts.grid_n))
    cams = contribution_cameras or orbit_cameras(
        opts.contrib_cameras, opts.contrib_radius, opts.contrib_elevation,
        opts.contrib_fov, opts.contrib_res, opts.contrib_res)
    contrib = stage("contributions",
                    lambda: compute_contributions(grid, cams, mesh=mesh))
    sparse = prune(grid, contrib, opts.prune_threshold, opts.block_b)
    stats["occupied_voxels"] = sparse.n_occupied
    stats["occupied_fraction"] = sparse.n_occupied / opts.grid_n ** 3
    stats["blocks"] = sparse.n_blocks

    psh = None
    vol = None
    vol_bounds = None
    if sparse.n_blocks:
        packed = pack_blocks(sparse, grid)
        psh = stage("psh_build", lambda: psh_build(packed.block_coords,
                                                   opts.grid_n // opts.block_b))
        vol = build_volume_maps(packed, psh, opts.sigma_max)
        vol_bounds = occupied_world_bounds(packed)
        stats["m_bar"] = psh.m_bar
        stats["r_bar"] = psh.r_bar
    else:
        stats["m_bar"] = 0
        stats["r_bar"] = 0

    env_strips = tuple(
        quantize_map(env.faces[i].reshape(6 * env.edge, env.edge, 3), 0.0, 1.0)
        for i in range(env.n_basis))
    assets = VMeshAssets(
        bounds=scene.bounds,
        grid_n=opts.grid_n,
        block_b=opts.block_b,
        sigma_max=opts.sigma_max,
        mesh=mesh,
        maps={
            "normal": quantize_map(maps.normal, 0.0, 1.0),
            "diffuse": quantize_map(maps.diffuse, 0.0, 1.0),
            "tint": quantize_map(maps.tint, 0.0, 1.0),
            "weights": quantize_map(maps.weights, 0.0, 1.0),
            "metallic": quantize_map(maps.metallic, 0.0, 1.0),
        },
        env=env_strips,
        lut=quantize_map(lut.table, 0.0, 1.0),
        lut_kind=scene.lut_kind,
        occupancy=build_occupancy(sparse),
        psh=psh,
        vol=vol,
        vol_bounds=vol_bounds,
    )
    stats["total_seconds"] = sum(stats["timings"].values())
    return assets, stats
