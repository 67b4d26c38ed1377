/** Manifest parsing and structural validation.
 *
 * Every constant the renderer relies on (quantization ranges, face order,
 * occupancy bit order, grid geometry) comes from here; nothing is baked
 * into the shaders.
 */

import type { Manifest, MapEntry, Bounds, Vec3 } from "./types.js";

export const SUPPORTED_VERSION = 1;
export const EXPECTED_FACE_ORDER = ["+x", "-x", "+y", "-y", "+z", "-z"];
export const EXPECTED_BIT_ORDER = "x + n*(y + n*z), LSB first within each byte";

const MESH_MAPS: [string, number][] = [
  ["normal", 3],
  ["diffuse", 3],
  ["tint", 3],
  ["weights", 4],
  ["metallic", 1],
];
const VOL_MAPS: [string, number][] = [
  ["diffuse", 3],
  ["tint", 3],
  ["weights", 4],
  ["normal", 3],
  ["density_metal", 3],
];

function fail(msg: string): never {
  throw new Error(`manifest.json: ${msg}`);
}

function checkVec3(v: unknown, what: string): Vec3 {
  if (!Array.isArray(v) || v.length !== 3 || v.some((x) => typeof x !== "number")) {
    fail(`${what} must be a 3-vector`);
  }
  return v as Vec3;
}

function checkBounds(b: Record<string, unknown>, what: string): Bounds {
  const min = checkVec3(b?.min, `${what}.min`);
  const max = checkVec3(b?.max, `${what}.max`);
  for (let i = 0; i < 3; i++) {
    if (!(min[i] < max[i])) fail(`${what} is empty on axis ${i}`);
  }
  return { min, max };
}

function checkRange(entry: Record<string, unknown>, channels: number, what: string): void {
  const lo = entry?.lo;
  const hi = entry?.hi;
  if (!Array.isArray(lo) || !Array.isArray(hi) || lo.length !== channels || hi.length !== channels) {
    fail(`${what} needs ${channels}-channel lo/hi ranges`);
  }
  for (let c = 0; c < channels; c++) {
    if (!((lo as number[])[c] < (hi as number[])[c])) fail(`${what} channel ${c} has lo >= hi`);
  }
}

function checkMapEntry(entry: Record<string, unknown>, channels: number, what: string): MapEntry {
  if (typeof entry?.file !== "string") fail(`${what}.file missing`);
  if (entry.channels !== channels) fail(`${what} must have ${channels} channels`);
  for (const k of ["width", "height"]) {
    const v = entry[k];
    if (typeof v !== "number" || v <= 0 || !Number.isInteger(v)) fail(`${what}.${k} invalid`);
  }
  checkRange(entry, channels, what);
  return entry as unknown as MapEntry;
}

/** Parse and validate manifest JSON text; throws with a precise message. */
export function parseManifest(text: string): Manifest {
  let raw: Record<string, unknown>;
  try {
    raw = JSON.parse(text);
  } catch {
    fail("invalid JSON");
  }
  if (raw.kind !== "vmesh-container") fail(`unknown kind ${JSON.stringify(raw.kind)}`);
  if (raw.version !== SUPPORTED_VERSION) {
    fail(`unsupported container version ${JSON.stringify(raw.version)}`);
  }
  checkBounds(raw.bounds as Record<string, unknown>, "bounds");

  const grid = raw.grid as Record<string, unknown>;
  for (const k of ["n", "block", "occupied", "blocks", "m_bar", "r_bar"]) {
    if (typeof grid?.[k] !== "number" || !Number.isInteger(grid[k] as number) || (grid[k] as number) < 0) {
      fail(`grid.${k} invalid`);
    }
  }
  const n = grid.n as number;
  const block = grid.block as number;
  if (block <= 0 || n % block !== 0) fail("grid.n must be a positive multiple of grid.block");

  if (typeof raw.sigma_max !== "number" || raw.sigma_max <= 0) fail("sigma_max invalid");

  const mesh = raw.mesh as Record<string, unknown>;
  if (typeof mesh?.file !== "string") fail("mesh.file missing");

  const maps = raw.maps as Record<string, Record<string, unknown>>;
  for (const [name, ch] of MESH_MAPS) {
    checkMapEntry(maps?.[name] ?? fail(`maps.${name} missing`), ch, `maps.${name}`);
  }

  const env = raw.env as Record<string, unknown>;
  if (env?.count !== 4 || !Array.isArray(env.maps) || env.maps.length !== 4) {
    fail("env must define exactly 4 maps");
  }
  if (typeof env.edge !== "number" || env.edge <= 0) fail("env.edge invalid");
  const faceOrder = env.face_order;
  if (!Array.isArray(faceOrder) || faceOrder.length !== 6
      || faceOrder.some((f, i) => f !== EXPECTED_FACE_ORDER[i])) {
    fail(`env.face_order must be ${EXPECTED_FACE_ORDER.join(",")}`);
  }
  for (let i = 0; i < 4; i++) {
    const m = (env.maps as Record<string, unknown>[])[i];
    if (typeof m?.file !== "string") fail(`env map ${i} missing file`);
    checkRange(m, 3, `env map ${i}`);
  }

  const lut = raw.lut as Record<string, unknown>;
  if (typeof lut?.file !== "string") fail("lut.file missing");
  if (typeof lut.size !== "number" || lut.size < 2) fail("lut.size invalid");
  checkRange(lut, 1, "lut");

  const occ = raw.occupancy as Record<string, unknown>;
  if (typeof occ?.file !== "string") fail("occupancy.file missing");
  if (occ.bytes !== (n * n * n) / 8) fail("occupancy.bytes disagrees with grid");
  if (occ.bit_order !== EXPECTED_BIT_ORDER) {
    fail(`unsupported occupancy bit order ${JSON.stringify(occ.bit_order)}`);
  }

  const volume = raw.volume as Record<string, unknown> | null;
  if (volume !== null && volume !== undefined) {
    const mBar = grid.m_bar as number;
    const rBar = grid.r_bar as number;
    if (mBar < 1 || rBar < 2) fail("grid hash parameters invalid for a volume container");
    if (volume.dim !== mBar * block) fail("volume.dim disagrees with grid hash size");
    if (typeof volume.offsets_file !== "string") fail("volume.offsets_file missing");
    checkBounds(volume.bounds as Record<string, unknown>, "volume.bounds");
    const vmaps = volume.maps as Record<string, Record<string, unknown>>;
    for (const [name, ch] of VOL_MAPS) {
      checkMapEntry(vmaps?.[name] ?? fail(`volume.maps.${name} missing`), ch, `volume.maps.${name}`);
    }
  } else if ((grid.blocks as number) > 0) {
    fail("grid.blocks > 0 but no volume section");
  }

  return raw as unknown as Manifest;
}
