/** Shared access to the baked fixture containers and expected tables. */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

export const FIXTURES = fileURLToPath(new URL("fixtures", import.meta.url));

export function fixtureBytes(...parts: string[]): Uint8Array {
  return new Uint8Array(readFileSync(join(FIXTURES, ...parts)));
}

export function fixtureText(...parts: string[]): string {
  return readFileSync(join(FIXTURES, ...parts), "utf8");
}

export interface FileDigest {
  file: string;
  sha256: string;
  width?: number;
  height?: number;
  channels?: number;
  bytes?: number;
}

export interface Expected {
  hybrid: {
    dir: string;
    files: FileDigest[];
    occupancy: {
      n: number;
      block: number;
      popcount: number;
      blocks: number[][];
      spots: { voxel: number[]; bit: boolean }[];
    };
    psh: { m_bar: number; r_bar: number; blocks: number[][]; slots: number[][] };
    voxels: {
      voxel: number[];
      texel: number[];
      density: number;
      metallic: number;
      diffuse: number[];
      weights: number[];
    }[];
  };
  mesh_only: { dir: string; files: FileDigest[]; popcount: number };
  camera: {
    pose0: {
      position: number[];
      look_at: number[];
      up: number[];
      fov_deg: number;
      width: number;
      height: number;
    };
    rays: { pixel: number[]; dir: number[] }[];
    projections: { point: number[]; pixel: number[] }[];
  };
  orbit: {
    azimuth: number;
    elevation: number;
    distance: number;
    target: number[];
    position: number[];
  }[];
  quant: { value: number; lo: number; hi: number; q: number; dequantized: number }[];
  shade: {
    normal: number[];
    omega_o: number[];
    diffuse: number[];
    tint: number[];
    weights: number[];
    metallic: number;
    rgb: number[];
  }[];
}

export const expected: Expected = JSON.parse(fixtureText("expected.json"));

/** Local-filesystem stand-in for the viewer's HTTP fetcher. */
export function fileFetcher(dir: string): (name: string) => Promise<Uint8Array> {
  return async (name: string) => fixtureBytes(dir, name);
}
