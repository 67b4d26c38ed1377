/** Container loading: fetch every payload next to manifest.json, decode,
 * and cross-check each file's geometry against the manifest before the
 * renderer touches it. Errors name the offending file so a broken or
 * mismatched container fails loudly instead of rendering garbage.
 */

import { parseManifest } from "./manifest.js";
import { decodePng, DecodedPng } from "./png.js";
import { parseObj, ParsedMesh } from "./obj.js";
import { popcount } from "./occupancy.js";
import type { Manifest, MapEntry, MeshMapName, VolMapName } from "./types.js";

export type FetchBytes = (url: string) => Promise<Uint8Array>;

export type VolMapKey = Exclude<VolMapName, "metallic">;

export interface LoadedAssets {
  manifest: Manifest;
  mesh: ParsedMesh;
  meshMaps: Record<MeshMapName, DecodedPng>;
  /** Four basis environment strips, edge x 6*edge each. */
  envMaps: DecodedPng[];
  lut: DecodedPng;
  occupancy: Uint8Array;
  /** Present iff the container stores a volume. */
  offsets: DecodedPng | null;
  volMaps: Record<VolMapKey, DecodedPng> | null;
}

export function httpFetcher(base: string): FetchBytes {
  const root = base.endsWith("/") ? base : base + "/";
  return async (name: string) => {
    const response = await fetch(root + name);
    if (!response.ok) {
      throw new Error(`${name}: HTTP ${response.status}`);
    }
    return new Uint8Array(await response.arrayBuffer());
  };
}

function checkImage(name: string, img: DecodedPng, width: number, height: number, channels: number): void {
  if (img.width !== width || img.height !== height) {
    throw new Error(`${name}: expected ${width}x${height}, file is ${img.width}x${img.height}`);
  }
  if (img.channels !== channels) {
    throw new Error(`${name}: expected ${channels} channels, file has ${img.channels}`);
  }
}

async function loadMap(fetchBytes: FetchBytes, entry: MapEntry, width: number, height: number): Promise<DecodedPng> {
  const img = await decodePng(await fetchBytes(entry.file));
  checkImage(entry.file, img, width, height, entry.channels);
  return img;
}

const MESH_MAP_NAMES: MeshMapName[] = ["normal", "diffuse", "tint", "weights", "metallic"];
const VOL_MAP_NAMES: VolMapKey[] = ["density_metal", "normal", "diffuse", "tint", "weights"];

export async function loadAssets(fetchBytes: FetchBytes): Promise<LoadedAssets> {
  const manifestBytes = await fetchBytes("manifest.json");
  const manifest = parseManifest(new TextDecoder().decode(manifestBytes));

  const mesh = parseObj(new TextDecoder().decode(await fetchBytes(manifest.mesh.file)));
  if (mesh.positions.length / 3 !== manifest.mesh.vertices) {
    throw new Error(
      `${manifest.mesh.file}: manifest lists ${manifest.mesh.vertices} vertices, file has ${mesh.positions.length / 3}`,
    );
  }
  if (mesh.triangles.length / 3 !== manifest.mesh.triangles) {
    throw new Error(
      `${manifest.mesh.file}: manifest lists ${manifest.mesh.triangles} triangles, file has ${mesh.triangles.length / 3}`,
    );
  }
  if (!mesh.uvs) {
    throw new Error(`${manifest.mesh.file}: faces carry no texture coordinates`);
  }

  const meshMaps = {} as Record<MeshMapName, DecodedPng>;
  for (const name of MESH_MAP_NAMES) {
    const entry = manifest.maps[name];
    meshMaps[name] = await loadMap(fetchBytes, entry, entry.width, entry.height);
  }

  const edge = manifest.env.edge;
  const envMaps: DecodedPng[] = [];
  for (const entry of manifest.env.maps) {
    const img = await decodePng(await fetchBytes(entry.file));
    checkImage(entry.file, img, edge, 6 * edge, 3);
    envMaps.push(img);
  }

  const lut = await decodePng(await fetchBytes(manifest.lut.file));
  checkImage(manifest.lut.file, lut, manifest.lut.size, manifest.lut.size, 1);

  const occupancy = await fetchBytes(manifest.occupancy.file);
  if (occupancy.length !== manifest.occupancy.bytes) {
    throw new Error(
      `${manifest.occupancy.file}: expected ${manifest.occupancy.bytes} bytes, file has ${occupancy.length}`,
    );
  }
  const bits = popcount(occupancy);
  if (bits !== manifest.grid.occupied) {
    throw new Error(
      `${manifest.occupancy.file}: ${bits} set bits but manifest lists ${manifest.grid.occupied} occupied voxels`,
    );
  }

  let offsets: DecodedPng | null = null;
  let volMaps: Record<VolMapKey, DecodedPng> | null = null;
  if (manifest.volume) {
    const vol = manifest.volume;
    const rBar = manifest.grid.r_bar;
    offsets = await decodePng(await fetchBytes(vol.offsets_file));
    checkImage(vol.offsets_file, offsets, rBar, rBar * rBar, 3);
    volMaps = {} as Record<VolMapKey, DecodedPng>;
    for (const name of VOL_MAP_NAMES) {
      const entry = vol.maps[name];
      // brick atlas planes are stacked vertically: dim x dim*dim texels
      volMaps[name] = await loadMap(fetchBytes, entry, vol.dim, vol.dim * vol.dim);
    }
  }

  return { manifest, mesh, meshMaps, envMaps, lut, occupancy, offsets, volMaps };
}
