"""Bakes the viewer test fixtures and the expected-value tables.

Run from the repository root with the Python package installed:

    python3 frontend/tests/make_fixtures.py

Outputs two small containers (one hybrid, one mesh-only) under
frontend/tests/fixtures/ plus expected.json holding values computed by
the asset pipeline: decoded-image digests, hash slots for every occupied
block, occupancy spot checks, dequantized texel values, camera rays and
projections, and orbit positions. The vitest suite replays those numbers
against the TypeScript implementations.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
from PIL import Image

from vmesh.bake import BakeOptions, bake_scene
from vmesh.container import save_container
from vmesh.core import CameraPose, camera_ray, orbit_cameras
from vmesh.scene import parse_scene
from vmesh.sparsevol import psh_lookup

HERE = Path(__file__).resolve().parent
FIXTURES = HERE / "fixtures"

HYBRID_SCENE = """scene {
  bounds -1.0 1.0
  sharpness 800.0
  surface {
    primitive sphere center -0.4 0 0 radius 0.25
  }
  volume {
    blob center 0.4 0.3 0.2 radius 0.12 density 40
  }
  material {
    diffuse constant 0.5 0.4 0.3
    tint constant 0.2 0.2 0.2
    weights constant 0.7 0.2 0.06 0.04
    metallic constant 0.1
  }
  env {
    map 0 constant 0.4 0.4 0.4
    map 1 gradient axis y low 0.1 0.1 0.1 high 0.8 0.9 1.0
    map 2 lobe dir 0 1 0 power 8 color 1 0.9 0.8
    map 3 constant 0.05 0.05 0.05
  }
  lut schlick
}
"""

MESH_ONLY_SCENE = """scene {
  bounds -1.0 1.0
  sharpness 800.0
  surface {
    primitive sphere center 0 0 0 radius 0.45
  }
  material {
    diffuse constant 0.6 0.3 0.2
    tint constant 0.3 0.3 0.3
    weights constant 0.6 0.3 0.07 0.03
    metallic constant 0.4
  }
  env {
    map 0 constant 0.5 0.5 0.5
    map 1 gradient axis y low 0.2 0.1 0.1 high 0.7 0.8 1.0
    map 2 lobe dir 0 0 1 power 6 color 0.9 0.9 1
    map 3 constant 0.1 0.1 0.1
  }
  lut schlick
}
"""

OPTS = BakeOptions(grid_n=32, block_b=16, mc_resolution=24, face_ratio=0.5,
                   atlas_size=128, env_edge=8, lut_size=16, prune_threshold=0.0)


def file_digests(asset_dir: Path) -> list[dict]:
    """Dimensions and decoded-pixel digests for every payload file."""
    out = []
    for path in sorted(asset_dir.iterdir()):
        if path.suffix == ".png":
            arr = np.asarray(Image.open(path))
            height, width = arr.shape[:2]
            channels = 1 if arr.ndim == 2 else arr.shape[2]
            out.append({
                "file": path.name,
                "width": width,
                "height": height,
                "channels": channels,
                "sha256": hashlib.sha256(arr.tobytes()).hexdigest(),
            })
        else:
            data = path.read_bytes()
            out.append({
                "file": path.name,
                "bytes": len(data),
                "sha256": hashlib.sha256(data).hexdigest(),
            })
    return out


def occupancy_tables(assets, rng) -> dict:
    grid = assets.occupancy_grid()
    n = assets.grid_n
    b = assets.block_b
    occ = np.argwhere(grid)  # (N, 3) in (x, y, z) order
    blocks = np.unique(occ // b, axis=0)
    spots = []
    probes = rng.integers(0, n, size=(40, 3))
    probes = np.concatenate([probes, occ[rng.integers(0, len(occ), size=10)]])
    for x, y, z in probes:
        spots.append({"voxel": [int(x), int(y), int(z)],
                      "bit": bool(grid[x, y, z])})
    return {
        "n": n,
        "block": b,
        "popcount": int(grid.sum()),
        "blocks": blocks.tolist(),
        "spots": spots,
    }


def psh_tables(assets) -> dict:
    grid = assets.occupancy_grid()
    blocks = np.unique(np.argwhere(grid) // assets.block_b, axis=0)
    slots = psh_lookup(assets.psh, blocks)
    return {
        "m_bar": assets.psh.m_bar,
        "r_bar": assets.psh.r_bar,
        "blocks": blocks.tolist(),
        "slots": slots.tolist(),
    }


def voxel_spots(assets, rng) -> list[dict]:
    """Dequantized channel values at brick texels of occupied voxels."""
    grid = assets.occupancy_grid()
    b = assets.block_b
    occ = np.argwhere(grid)
    picks = occ[rng.integers(0, len(occ), size=12)]
    slots = psh_lookup(assets.psh, picks // b)
    texels = slots * b + picks % b
    dm = assets.vol_values("density_metal")
    diffuse = assets.vol_values("diffuse")
    weights = assets.vol_values("weights")
    out = []
    for (vx, vy, vz), (tx, ty, tz) in zip(picks, texels):
        out.append({
            "voxel": [int(vx), int(vy), int(vz)],
            "texel": [int(tx), int(ty), int(tz)],
            "density": float(dm[tz, ty, tx, 0]),
            "metallic": float(dm[tz, ty, tx, 1]),
            "diffuse": [float(v) for v in diffuse[tz, ty, tx]],
            "weights": [float(v) for v in weights[tz, ty, tx]],
        })
    return out


def camera_tables() -> dict:
    cam = orbit_cameras(width=64, height=64)[0]
    rays = []
    for px, py in [(0, 0), (63, 0), (0, 63), (63, 63), (32, 32), (7, 41)]:
        ray = camera_ray(cam, px, py)
        rays.append({"pixel": [px, py], "dir": [float(v) for v in ray.direction]})
    right, up, fwd = cam.basis()
    tan_v = np.tan(np.radians(cam.fov_deg) / 2)
    tan_h = tan_v * cam.width / cam.height
    projections = []
    for point in [(0.0, 0.0, 0.0), (0.3, -0.2, 0.1), (-0.5, 0.4, -0.3), (0.05, 0.6, 0.55)]:
        rel = np.asarray(point) - cam.position
        x_cam = float(right @ rel)
        y_cam = float(up @ rel)
        z_cam = float(fwd @ rel)
        px = ((x_cam / (tan_h * z_cam)) + 1.0) / 2.0 * cam.width - 0.5
        py = (1.0 - (y_cam / (tan_v * z_cam))) / 2.0 * cam.height - 0.5
        projections.append({"point": list(point), "pixel": [px, py]})
    return {
        "pose0": {
            "position": [float(v) for v in cam.position],
            "look_at": [float(v) for v in cam.look_at],
            "up": [float(v) for v in cam.up],
            "fov_deg": cam.fov_deg,
            "width": cam.width,
            "height": cam.height,
        },
        "rays": rays,
        "projections": projections,
    }


def orbit_tables() -> list[dict]:
    out = []
    for az, el, dist, target in [
        (0.0, 20.0, 2.5, (0.0, 0.0, 0.0)),
        (90.0, 20.0, 2.5, (0.0, 0.0, 0.0)),
        (45.0, -30.0, 1.7, (0.1, -0.2, 0.3)),
        (180.0, 85.0, 3.0, (0.0, 0.5, 0.0)),
    ]:
        a = np.radians(az)
        e = np.radians(el)
        pos = [target[0] + dist * np.cos(e) * np.cos(a),
               target[1] + dist * np.sin(e),
               target[2] + dist * np.cos(e) * np.sin(a)]
        out.append({"azimuth": az, "elevation": el, "distance": dist,
                    "target": list(target), "position": [float(v) for v in pos]})
    return out


def shade_tables(assets, rng) -> list[dict]:
    """Shaded colors for random inputs against the baked env and LUT."""
    from vmesh.appearance import MaterialSample, shade

    env = assets.env_set()
    lut = assets.lut_table()
    out = []
    dirs = rng.normal(size=(10, 2, 3))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    for k in range(len(dirs)):
        normal, omega_o = dirs[k]
        mat = MaterialSample(
            normal=normal,
            diffuse=rng.uniform(0, 1, 3),
            tint=rng.uniform(0, 1, 3),
            weights=rng.uniform(0, 1, 4),
            metallic=float(rng.uniform(0, 1)),
        )
        rgb = shade(mat, omega_o, env, lut)
        out.append({
            "normal": [float(v) for v in normal],
            "omega_o": [float(v) for v in omega_o],
            "diffuse": [float(v) for v in mat.diffuse],
            "tint": [float(v) for v in mat.tint],
            "weights": [float(v) for v in mat.weights],
            "metallic": mat.metallic,
            "rgb": [float(v) for v in rgb],
        })
    return out


def quant_tables() -> list[dict]:
    rng = np.random.default_rng(99)
    cases = []
    values = np.concatenate([rng.uniform(-0.5, 1.5, 20), [0.0, 1.0, 0.5, -2.0, 3.0]])
    for v in values:
        lo, hi = 0.0, 1.0
        q = int(np.floor(np.clip((v - lo) / (hi - lo), 0.0, 1.0) * 255.0 + 0.5))
        cases.append({"value": float(v), "lo": lo, "hi": hi, "q": q,
                      "dequantized": lo + q / 255.0 * (hi - lo)})
    for v, lo, hi in [(37.2, 0.0, 200.0), (-3.0, -8.0, 12.0), (0.31, 0.3, 0.35)]:
        q = int(np.floor(np.clip((v - lo) / (hi - lo), 0.0, 1.0) * 255.0 + 0.5))
        cases.append({"value": v, "lo": lo, "hi": hi, "q": q,
                      "dequantized": lo + q / 255.0 * (hi - lo)})
    return cases


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(424242)

    hybrid_scene = parse_scene(HYBRID_SCENE)
    cam = CameraPose((0.0, 0.6, 2.5), (0.0, 0.0, 0.0), (0.0, 1.0, 0.0), 50.0, 64, 64)
    hybrid, _ = bake_scene(hybrid_scene, OPTS, contribution_cameras=[cam])
    hybrid_dir = FIXTURES / "asset"
    save_container(hybrid, hybrid_dir)

    mesh_scene = parse_scene(MESH_ONLY_SCENE)
    mesh_only, _ = bake_scene(mesh_scene, OPTS, contribution_cameras=[cam])
    mesh_dir = FIXTURES / "asset_meshonly"
    save_container(mesh_only, mesh_dir)

    expected = {
        "hybrid": {
            "dir": "asset",
            "files": file_digests(hybrid_dir),
            "occupancy": occupancy_tables(hybrid, rng),
            "psh": psh_tables(hybrid),
            "voxels": voxel_spots(hybrid, rng),
        },
        "mesh_only": {
            "dir": "asset_meshonly",
            "files": file_digests(mesh_dir),
            "popcount": int(mesh_only.occupancy_grid().sum()),
        },
        "camera": camera_tables(),
        "orbit": orbit_tables(),
        "quant": quant_tables(),
        "shade": shade_tables(hybrid, rng),
    }
    (FIXTURES / "expected.json").write_text(json.dumps(expected, indent=1))
    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
