"""Scene description language: analytic surfaces, densities, materials, lighting.

A scene file is a nested block structure, one statement per line, with `#`
comments. Example:

    scene {
      bounds -1 1
      sharpness 3000
      surface {
        primitive sphere center 0 0 0 radius 0.5
        primitive box center 0 -0.6 0 size 0.8 0.2 0.8 op union
      }
      volume {
        curve from -0.4 0.5 0 to 0.4 0.5 0 radius 0.02 density 70
      }
      material {
        diffuse checker 0.6 0.2 0.2 0.2 0.3 0.6 scale 3
        tint constant 0.2 0.2 0.2
        weights constant 0.6 0.25 0.1 0.05
        metallic constant 0.3
      }
      env {
        map 0 gradient axis y low 0.2 0.2 0.2 high 0.5 0.6 0.8
        map 1 lobe dir 0.5 0.8 -0.2 power 16 color 0.9 0.85 0.7
        map 2 constant 0.15 0.18 0.2
        map 3 lobe dir -0.7 0.3 0.6 power 6 color 0.3 0.45 0.5
      }
      lut schlick
    }

Surface primitives form a CSG chain folded left to right with each
primitive's `op` (union, intersect, subtract); the first must be a union.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Aabb

SURFACE_KINDS = ("sphere", "box", "torus", "capsule")
VOLUME_KINDS = ("blob", "curve", "slab")
CSG_OPS = ("union", "intersect", "subtract")
ENV_KINDS = ("constant", "gradient", "lobe")
LUT_KINDS = ("schlick",)
AXES = {"x": 0, "y": 1, "z": 2}


class SceneParseError(ValueError):
    """Parse failure carrying the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class SdfPrimitive:
    kind: str            # sphere | box | torus | capsule
    op: str              # union | intersect | subtract
    center: np.ndarray | None = None
    radius: float = 0.0  # sphere/torus ring/capsule radius
    size: np.ndarray | None = None   # box full extents
    tube: float = 0.0    # torus tube radius
    a: np.ndarray | None = None      # capsule endpoints
    b: np.ndarray | None = None


@dataclass(frozen=True)
class DensityElement:
    kind: str            # blob | curve | slab
    density: float
    center: np.ndarray | None = None
    radius: float = 0.0
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    axis: int = 0
    lo: float = 0.0
    hi: float = 0.0


@dataclass(frozen=True)
class MaterialField:
    """Constant value or a 3D checker between two values."""

    kind: str            # constant | checker
    value: np.ndarray
    value2: np.ndarray | None = None
    scale: float = 1.0


@dataclass(frozen=True)
class EnvSpec:
    kind: str            # constant | gradient | lobe
    color: np.ndarray | None = None
    axis: int = 1
    low: np.ndarray | None = None
    high: np.ndarray | None = None
    direction: np.ndarray | None = None
    power: float = 1.0


@dataclass(frozen=True)
class SceneDescription:
    bounds: Aabb
    sharpness: float
    surface: tuple[SdfPrimitive, ...]
    volume: tuple[DensityElement, ...]
    diffuse: MaterialField
    tint: MaterialField
    weights: MaterialField
    metallic: MaterialField
    env: tuple[EnvSpec, ...]
    lut_kind: str


class _Cursor:
    """Token reader for one statement line."""

    def __init__(self, line: int, tokens: list[str]):
        self.line = line
        self.tokens = tokens
        self.pos = 0

    def done(self) -> bool:
        return self.pos >= len(self.tokens)

    def word(self, what: str) -> str:
        if self.done():
            raise SceneParseError(self.line, f"expected {what}")
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def keyword(self, name: str) -> None:
        t = self.word(f"keyword '{name}'")
        if t != name:
            raise SceneParseError(self.line, f"expected keyword '{name}', got '{t}'")

    def number(self, what: str) -> float:
        t = self.word(what)
        try:
            return float(t)
        except ValueError:
            raise SceneParseError(self.line, f"expected number for {what}, got '{t}'") from None

    def vec(self, what: str) -> np.ndarray:
        return np.array([self.number(f"{what}[{i}]") for i in range(3)], dtype=np.float64)

    def end(self) -> None:
        if not self.done():
            raise SceneParseError(self.line, f"trailing tokens: {' '.join(self.tokens[self.pos:])}")


def _unit_range(cur: _Cursor, v: np.ndarray, what: str) -> np.ndarray:
    if np.any(v < 0.0) or np.any(v > 1.0):
        raise SceneParseError(cur.line, f"{what} components must lie in [0, 1]")
    return v


def _parse_primitive(cur: _Cursor, first: bool) -> SdfPrimitive:
    kind = cur.word("primitive kind")
    if kind not in SURFACE_KINDS:
        raise SceneParseError(cur.line, f"unknown primitive '{kind}'")
    fields: dict = {}
    if kind == "sphere":
        cur.keyword("center")
        fields["center"] = cur.vec("center")
        cur.keyword("radius")
        fields["radius"] = cur.number("radius")
        if fields["radius"] <= 0:
            raise SceneParseError(cur.line, "sphere radius must be positive")
    elif kind == "box":
        cur.keyword("center")
        fields["center"] = cur.vec("center")
        cur.keyword("size")
        fields["size"] = cur.vec("size")
        if np.any(fields["size"] <= 0):
            raise SceneParseError(cur.line, "box size must be positive")
    elif kind == "torus":
        cur.keyword("center")
        fields["center"] = cur.vec("center")
        cur.keyword("radius")
        fields["radius"] = cur.number("radius")
        cur.keyword("tube")
        fields["tube"] = cur.number("tube")
        if fields["radius"] <= 0 or fields["tube"] <= 0:
            raise SceneParseError(cur.line, "torus radii must be positive")
    else:
        cur.keyword("from")
        fields["a"] = cur.vec("from")
        cur.keyword("to")
        fields["b"] = cur.vec("to")
        cur.keyword("radius")
        fields["radius"] = cur.number("radius")
        if fields["radius"] <= 0:
            raise SceneParseError(cur.line, "capsule radius must be positive")
        if np.allclose(fields["a"], fields["b"]):
            raise SceneParseError(cur.line, "capsule endpoints coincide")
    op = "union"
    if not cur.done():
        cur.keyword("op")
        op = cur.word("csg op")
        if op not in CSG_OPS:
            raise SceneParseError(cur.line, f"unknown csg op '{op}'")
    cur.end()
    if first and op != "union":
        raise SceneParseError(cur.line, "first primitive must use op union")
    return SdfPrimitive(kind=kind, op=op, **fields)


def _parse_volume_element(cur: _Cursor, kind: str) -> DensityElement:
    fields: dict = {}
    if kind == "blob":
        cur.keyword("center")
        fields["center"] = cur.vec("center")
        cur.keyword("radius")
        fields["radius"] = cur.number("radius")
        if fields["radius"] <= 0:
            raise SceneParseError(cur.line, "blob radius must be positive")
    elif kind == "curve":
        cur.keyword("from")
        fields["a"] = cur.vec("from")
        cur.keyword("to")
        fields["b"] = cur.vec("to")
        cur.keyword("radius")
        fields["radius"] = cur.number("radius")
        if fields["radius"] <= 0:
            raise SceneParseError(cur.line, "curve radius must be positive")
        if np.allclose(fields["a"], fields["b"]):
            raise SceneParseError(cur.line, "curve endpoints coincide")
    else:
        cur.keyword("axis")
        ax = cur.word("axis")
        if ax not in AXES:
            raise SceneParseError(cur.line, f"unknown axis '{ax}'")
        fields["axis"] = AXES[ax]
        cur.keyword("min")
        fields["lo"] = cur.number("min")
        cur.keyword("max")
        fields["hi"] = cur.number("max")
        if fields["lo"] >= fields["hi"]:
            raise SceneParseError(cur.line, "slab needs min < max")
    cur.keyword("density")
    d = cur.number("density")
    if d < 0:
        raise SceneParseError(cur.line, "density must be non-negative")
    cur.end()
    return DensityElement(kind=kind, density=d, **fields)


def _parse_material(cur: _Cursor, channels: int) -> MaterialField:
    kind = cur.word("material pattern")
    if kind == "constant":
        v = cur.vec("value") if channels == 3 else np.array(
            [cur.number(f"value[{i}]") for i in range(channels)], dtype=np.float64)
        _unit_range(cur, v, "material")
        cur.end()
        return MaterialField(kind="constant", value=v)
    if kind == "checker":
        v1 = cur.vec("first color") if channels == 3 else np.array(
            [cur.number(f"value[{i}]") for i in range(channels)], dtype=np.float64)
        v2 = cur.vec("second color") if channels == 3 else np.array(
            [cur.number(f"value2[{i}]") for i in range(channels)], dtype=np.float64)
        _unit_range(cur, v1, "material")
        _unit_range(cur, v2, "material")
        cur.keyword("scale")
        scale = cur.number("scale")
        if scale <= 0:
            raise SceneParseError(cur.line, "checker scale must be positive")
        cur.end()
        return MaterialField(kind="checker", value=v1, value2=v2, scale=scale)
    raise SceneParseError(cur.line, f"unknown material pattern '{kind}'")


def _parse_env(cur: _Cursor) -> tuple[int, EnvSpec]:
    idx = cur.number("map index")
    if idx != int(idx) or not (0 <= idx <= 3):
        raise SceneParseError(cur.line, "env map index must be 0..3")
    kind = cur.word("env kind")
    if kind == "constant":
        color = cur.vec("color")
        cur.end()
        return int(idx), EnvSpec(kind="constant", color=color)
    if kind == "gradient":
        cur.keyword("axis")
        ax = cur.word("axis")
        if ax not in AXES:
            raise SceneParseError(cur.line, f"unknown axis '{ax}'")
        cur.keyword("low")
        low = cur.vec("low")
        cur.keyword("high")
        high = cur.vec("high")
        cur.end()
        return int(idx), EnvSpec(kind="gradient", axis=AXES[ax], low=low, high=high)
    if kind == "lobe":
        cur.keyword("dir")
        d = cur.vec("dir")
        if np.linalg.norm(d) < 1e-12:
            raise SceneParseError(cur.line, "lobe direction must be nonzero")
        cur.keyword("power")
        p = cur.number("power")
        if p <= 0:
            raise SceneParseError(cur.line, "lobe power must be positive")
        cur.keyword("color")
        color = cur.vec("color")
        cur.end()
        return int(idx), EnvSpec(kind="lobe", direction=d / np.linalg.norm(d), power=p, color=color)
    raise SceneParseError(cur.line, f"unknown env kind '{kind}'")


def parse_scene(text: str, name: str = "<scene>") -> SceneDescription:
    """Parse scene source text; raises SceneParseError with a line number."""
    lines = text.splitlines()
    stack: list[str] = []
    bounds = None
    sharpness = None
    surface: list[SdfPrimitive] = []
    volume: list[DensityElement] = []
    materials: dict[str, MaterialField] = {}
    env_maps: dict[int, EnvSpec] = {}
    lut_kind = None
    saw = {"scene": False, "material": False, "env": False}

    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "}":
            if not stack:
                raise SceneParseError(lineno, "unmatched '}'")
            stack.pop()
            continue
        if line.endswith("{"):
            block = line[:-1].strip()
            if block == "scene":
                if stack:
                    raise SceneParseError(lineno, "scene block must be top-level")
                if saw["scene"]:
                    raise SceneParseError(lineno, "duplicate scene block")
                saw["scene"] = True
            elif block in ("surface", "volume", "material", "env"):
                if stack != ["scene"]:
                    raise SceneParseError(lineno, f"'{block}' block must be inside scene")
                if block in ("material", "env"):
                    if saw[block]:
                        raise SceneParseError(lineno, f"duplicate {block} block")
                    saw[block] = True
            else:
                raise SceneParseError(lineno, f"unknown block '{block}'")
            stack.append(block)
            continue

        tokens = line.split()
        cur = _Cursor(lineno, tokens)
        ctx = stack[-1] if stack else None
        head = cur.word("statement")

        if ctx == "scene":
            if head == "bounds":
                lo = cur.number("bounds min")
                hi = cur.number("bounds max")
                cur.end()
                if lo >= hi:
                    raise SceneParseError(lineno, "bounds need min < max")
                bounds = Aabb(np.full(3, lo), np.full(3, hi))
            elif head == "sharpness":
                sharpness = cur.number("sharpness")
                cur.end()
                if sharpness <= 0:
                    raise SceneParseError(lineno, "sharpness must be positive")
            elif head == "lut":
                lut_kind = cur.word("lut kind")
                cur.end()
                if lut_kind not in LUT_KINDS:
                    raise SceneParseError(lineno, f"unknown lut kind '{lut_kind}'")
            else:
                raise SceneParseError(lineno, f"unknown statement '{head}' in scene block")
        elif ctx == "surface":
            if head != "primitive":
                raise SceneParseError(lineno, f"unknown statement '{head}' in surface block")
            surface.append(_parse_primitive(cur, first=not surface))
        elif ctx == "volume":
            if head not in VOLUME_KINDS:
                raise SceneParseError(lineno, f"unknown volume element '{head}'")
            volume.append(_parse_volume_element(cur, head))
        elif ctx == "material":
            if head not in ("diffuse", "tint", "weights", "metallic"):
                raise SceneParseError(lineno, f"unknown material channel '{head}'")
            if head in materials:
                raise SceneParseError(lineno, f"duplicate material channel '{head}'")
            channels = {"diffuse": 3, "tint": 3, "weights": 4, "metallic": 1}[head]
            if head in ("weights", "metallic"):
                field = _parse_material(cur, channels)
                if field.kind != "constant":
                    raise SceneParseError(lineno, f"{head} supports only constant values")
                materials[head] = field
            else:
                materials[head] = _parse_material(cur, channels)
        elif ctx == "env":
            if head != "map":
                raise SceneParseError(lineno, f"unknown statement '{head}' in env block")
            idx, spec = _parse_env(cur)
            if idx in env_maps:
                raise SceneParseError(lineno, f"duplicate env map {idx}")
            env_maps[idx] = spec
        else:
            raise SceneParseError(lineno, f"statement '{head}' outside any block")

    if stack:
        raise SceneParseError(len(lines), f"unclosed block '{stack[-1]}'")
    if not saw["scene"]:
        raise SceneParseError(1, "missing scene block")
    if bounds is None:
        raise SceneParseError(1, "missing bounds statement")
    if sharpness is None:
        raise SceneParseError(1, "missing sharpness statement")
    if lut_kind is None:
        raise SceneParseError(1, "missing lut statement")
    for ch in ("diffuse", "tint", "weights", "metallic"):
        if ch not in materials:
            raise SceneParseError(1, f"missing material channel '{ch}'")
    missing = [i for i in range(4) if i not in env_maps]
    if missing:
        raise SceneParseError(1, f"missing env map(s) {missing}; exactly maps 0..3 required")

    return SceneDescription(
        bounds=bounds,
        sharpness=float(sharpness),
        surface=tuple(surface),
        volume=tuple(volume),
        diffuse=materials["diffuse"],
        tint=materials["tint"],
        weights=materials["weights"],
        metallic=materials["metallic"],
        env=tuple(env_maps[i] for i in range(4)),
        lut_kind=lut_kind,
    )


def load_scene(path) -> SceneDescription:
    with open(path, "r", encoding="utf-8") as f:
        return parse_scene(f.read(), name=str(path))
