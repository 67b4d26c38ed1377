"""Command line interface: bake, render, reference, validate, compare, info.

Exit codes: 0 success, 1 invariant or comparison failure, 2 usage/input error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np
from PIL import Image

from . import report
from .appearance import bake_attenuation_lut, bake_env_maps
from .bake import BakeOptions, bake_scene
from .container import ContainerError, load_container, save_container, validate_assets
from .core import load_camera_path
from .fields import REFERENCE_STEPS, render_reference
from .mesher import AtlasCapacityError
from .renderer import RenderConfig, psnr, render_frame, save_frame
from .scene import SceneParseError, parse_scene
from .sparsevol import PshBuildError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
PSNR_PRINT_CAP = 99.0


def _err(msg: str) -> None:
    print(f"vmesh: {msg}", file=sys.stderr)


def _read_scene(path: str):
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"scene file not found: {path}")
    return parse_scene(p.read_text(encoding="utf-8"))


def _override_cameras(cams, width, height):
    if width is None and height is None:
        return cams
    out = []
    for cam in cams:
        kw = {}
        if width is not None:
            kw["width"] = width
        if height is not None:
            kw["height"] = height
        out.append(dataclasses.replace(cam, **kw))
    return out


def cmd_bake(args) -> int:
    try:
        scene = _read_scene(args.scene)
        contrib = load_camera_path(args.cams) if args.cams else None
        opts = BakeOptions(grid_n=args.grid, block_b=args.block,
                           mc_resolution=args.mc, face_ratio=args.faces,
                           atlas_size=args.atlas, prune_threshold=args.prune)
    except (FileNotFoundError, SceneParseError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    try:
        assets, stats = bake_scene(scene, opts, contribution_cameras=contrib)
        files = save_container(assets, args.out)
    except (AtlasCapacityError, PshBuildError, OSError) as exc:
        _err(str(exc))
        return EXIT_FAIL
    out = Path(args.out)
    frac = stats["occupied_fraction"] * 100.0
    print(f"faces: {stats['faces_final']} (extracted {stats['faces_extracted']})")
    print(f"occupied voxels: {stats['occupied_voxels']} ({frac:.4f}%)")
    print(f"blocks: {stats['blocks']}")
    print(f"m_bar: {stats['m_bar']}  r_bar: {stats['r_bar']}")
    print("payload bytes:")
    total = 0
    for name in files:
        size = (out / name).stat().st_size
        total += size
        print(f"  {name:<24} {size}")
    print(f"total: {total} bytes")
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        assets = load_container(args.assets)
        cams = _override_cameras(load_camera_path(args.campath),
                                 args.width, args.height)
        cfg = RenderConfig(step_scale=args.step)
    except (FileNotFoundError, ContainerError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    millis = []
    for i, cam in enumerate(cams):
        t0 = time.perf_counter()
        img = render_frame(assets, cam, cfg)
        ms = (time.perf_counter() - t0) * 1000.0
        name = f"frame_{i:04d}.png"
        save_frame(img, out / name)
        names.append(name)
        millis.append(ms)
        print(f"{name} {ms:.1f} ms")
    if millis:
        print(f"mean {sum(millis) / len(millis):.1f} ms over {len(millis)} frames")
    if args.report:
        for p in report.write_timing_report(args.report, names, millis):
            print(f"report: {p}")
    return EXIT_OK


def cmd_reference(args) -> int:
    try:
        scene = _read_scene(args.scene)
        cams = _override_cameras(load_camera_path(args.campath),
                                 args.width, args.height)
        if args.steps < 2:
            raise ValueError("--steps must be at least 2")
    except (FileNotFoundError, SceneParseError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    maps = bake_env_maps(scene)
    lut = bake_attenuation_lut(scene.lut_kind)
    for i, cam in enumerate(cams):
        t0 = time.perf_counter()
        img = render_reference(scene, cam, steps=args.steps, maps=maps, lut=lut)
        ms = (time.perf_counter() - t0) * 1000.0
        name = f"frame_{i:04d}.png"
        save_frame(img.data, out / name)
        print(f"{name} {ms:.1f} ms")
    return EXIT_OK


def cmd_validate(args) -> int:
    root = Path(args.assets)
    if not (root / "manifest.json").is_file():
        _err(f"no manifest.json under {args.assets}")
        return EXIT_USAGE
    try:
        assets = load_container(root)
    except ContainerError as exc:
        print(f"FAIL {exc}")
        return EXIT_FAIL
    problems = validate_assets(assets)
    for p in problems:
        print(f"FAIL {p}")
    if problems:
        return EXIT_FAIL
    print("ok: all container invariants hold")
    return EXIT_OK


def _load_frame(path: Path) -> np.ndarray:
    return np.asarray(Image.open(path)).astype(np.float64) / 255.0


def cmd_compare(args) -> int:
    dir_a, dir_b = Path(args.dir_a), Path(args.dir_b)
    if not dir_a.is_dir() or not dir_b.is_dir():
        _err("compare needs two frame directories")
        return EXIT_USAGE
    frames_a = sorted(dir_a.glob("*.png"))
    frames_b = sorted(dir_b.glob("*.png"))
    if len(frames_a) != len(frames_b) or not frames_a:
        _err(f"frame count mismatch: {len(frames_a)} vs {len(frames_b)}")
        return EXIT_USAGE
    names = []
    values = []
    for fa, fb in zip(frames_a, frames_b):
        a = _load_frame(fa)
        b = _load_frame(fb)
        if a.shape != b.shape:
            _err(f"{fa.name}: dimension mismatch {a.shape} vs {b.shape}")
            return EXIT_USAGE
        v = min(psnr(a, b), PSNR_PRINT_CAP)
        names.append(fa.name)
        values.append(v)
        print(f"{fa.name} {v:.2f} dB")
    mean = sum(values) / len(values)
    print(f"mean {mean:.2f} dB over {len(values)} frames")
    if args.report:
        for p in report.write_psnr_report(args.report, names, values,
                                          threshold=args.min_psnr):
            print(f"report: {p}")
    return EXIT_OK if mean >= args.min_psnr else EXIT_FAIL


def cmd_info(args) -> int:
    root = Path(args.assets)
    man_path = root / "manifest.json"
    if not man_path.is_file():
        _err(f"no manifest.json under {args.assets}")
        return EXIT_USAGE
    try:
        assets = load_container(root)
    except ContainerError as exc:
        _err(str(exc))
        return EXIT_USAGE
    man = assets.manifest()
    grid = man["grid"]
    n = grid["n"]
    sparsity = grid["occupied"] / n ** 3 * 100.0
    print(f"container version {man['version']}")
    b = man["bounds"]
    print(f"bounds: {b['min']} .. {b['max']}")
    print(f"grid: {n}^3, block {grid['block']}")
    print(f"occupied voxels: {grid['occupied']} (sparsity {sparsity:.4f}%)")
    print(f"blocks: {grid['blocks']}  m_bar: {grid['m_bar']}  r_bar: {grid['r_bar']}")
    print(f"mesh: {man['mesh']['vertices']} vertices, "
          f"{man['mesh']['triangles']} triangles")
    print(f"env: {man['env']['count']} cube maps, edge {man['env']['edge']}")
    print(f"lut: {man['lut']['kind']}, {man['lut']['size']}x{man['lut']['size']}")
    print("storage:")
    total = 0
    for f in sorted(p for p in root.iterdir() if p.is_file()):
        size = f.stat().st_size
        total += size
        print(f"  {f.name:<24} {size}")
    print(f"total: {total} bytes")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmesh",
        description="Bake, store, and render hybrid volume-mesh assets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bake", help="bake a scene file into an asset container")
    p.add_argument("scene")
    p.add_argument("out")
    p.add_argument("--grid", type=int, default=BakeOptions.grid_n)
    p.add_argument("--block", type=int, default=BakeOptions.block_b)
    p.add_argument("--mc", type=int, default=BakeOptions.mc_resolution)
    p.add_argument("--faces", type=float, default=BakeOptions.face_ratio)
    p.add_argument("--atlas", type=int, default=BakeOptions.atlas_size)
    p.add_argument("--prune", type=float, default=BakeOptions.prune_threshold)
    p.add_argument("--cams", help="camera path file for contribution pruning")
    p.set_defaults(fn=cmd_bake)

    p = sub.add_parser("render", help="render a container over a camera path")
    p.add_argument("assets")
    p.add_argument("campath")
    p.add_argument("out")
    p.add_argument("--step", type=float, default=RenderConfig.step_scale)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--report", help="directory for CSV and figure output")
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("reference",
                       help="brute-force render of the analytic scene")
    p.add_argument("scene")
    p.add_argument("campath")
    p.add_argument("out")
    p.add_argument("--steps", type=int, default=REFERENCE_STEPS)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.set_defaults(fn=cmd_reference)

    p = sub.add_parser("validate", help="check container invariants")
    p.add_argument("assets")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("compare", help="PSNR between two frame directories")
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    p.add_argument("--min-psnr", type=float, default=0.0)
    p.add_argument("--report", help="directory for CSV and figure output")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("info", help="print manifest and storage summary")
    p.add_argument("assets")
    p.set_defaults(fn=cmd_info)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
