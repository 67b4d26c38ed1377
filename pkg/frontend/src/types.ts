/** Shared container and viewer types. */

export type Vec3 = [number, number, number];

export interface QuantRange {
  lo: number[];
  hi: number[];
}

export interface MapEntry extends QuantRange {
  file: string;
  channels: number;
  width: number;
  height: number;
}

export interface Bounds {
  min: Vec3;
  max: Vec3;
}

export interface GridInfo {
  n: number;
  block: number;
  occupied: number;
  blocks: number;
  m_bar: number;
  r_bar: number;
}

export type MeshMapName = "normal" | "diffuse" | "tint" | "weights" | "metallic";
export type VolMapName = MeshMapName | "density_metal";

export interface VolumeInfo {
  dim: number;
  layout: string;
  offsets_file: string;
  bounds: Bounds;
  maps: Record<Exclude<VolMapName, "metallic">, MapEntry>;
}

export interface Manifest {
  version: number;
  kind: string;
  bounds: Bounds;
  grid: GridInfo;
  sigma_max: number;
  mesh: { file: string; vertices: number; triangles: number };
  maps: Record<MeshMapName, MapEntry>;
  env: {
    edge: number;
    count: number;
    face_order: string[];
    maps: ({ file: string } & QuantRange)[];
  };
  lut: { file: string; size: number; kind: string } & QuantRange;
  occupancy: { file: string; bytes: number; bit_order: string };
  volume: VolumeInfo | null;
}
