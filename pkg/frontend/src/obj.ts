/** Minimal OBJ reader for the container's mesh: v / vt / f records with
 * per-corner texture indices, CCW front faces. */

export interface ParsedMesh {
  /** (V*3) positions. */
  positions: Float64Array;
  /** (F*3) vertex indices, zero-based. */
  triangles: Uint32Array;
  /** (F*3*2) per-corner uvs, or null when the file has none. */
  uvs: Float64Array | null;
}

export function parseObj(text: string): ParsedMesh {
  const positions: number[] = [];
  const rawUvs: number[] = [];
  const faceV: number[] = [];
  const faceT: number[] = [];
  const lines = text.split("\n");
  for (let ln = 0; ln < lines.length; ln++) {
    const parts = lines[ln].trim().split(/\s+/);
    if (parts.length === 0 || parts[0] === "" || parts[0].startsWith("#")) continue;
    const tag = parts[0];
    try {
      if (tag === "v") {
        if (parts.length < 4) throw new Error("short vertex");
        positions.push(Number(parts[1]), Number(parts[2]), Number(parts[3]));
      } else if (tag === "vt") {
        if (parts.length < 3) throw new Error("short uv");
        rawUvs.push(Number(parts[1]), Number(parts[2]));
      } else if (tag === "f") {
        if (parts.length !== 4) throw new Error("faces must be triangles");
        for (let c = 1; c <= 3; c++) {
          const bits = parts[c].split("/");
          faceV.push(Number(bits[0]) - 1);
          if (bits.length > 1 && bits[1] !== "") faceT.push(Number(bits[1]) - 1);
        }
      }
    } catch (e) {
      throw new Error(`mesh.obj: line ${ln + 1}: ${(e as Error).message}`);
    }
  }
  if (positions.some((x) => !Number.isFinite(x)) || faceV.some((i) => !Number.isInteger(i))) {
    throw new Error("mesh.obj: malformed numeric field");
  }
  const nVerts = positions.length / 3;
  for (const i of faceV) {
    if (i < 0 || i >= nVerts) throw new Error(`mesh.obj: vertex index ${i + 1} out of range`);
  }
  let uvs: Float64Array | null = null;
  if (faceT.length > 0) {
    if (faceT.length !== faceV.length) throw new Error("mesh.obj: mixed textured and untextured faces");
    uvs = new Float64Array(faceT.length * 2);
    for (let k = 0; k < faceT.length; k++) {
      const t = faceT[k];
      if (t < 0 || t * 2 + 1 >= rawUvs.length) throw new Error(`mesh.obj: uv index ${t + 1} out of range`);
      uvs[k * 2] = rawUvs[t * 2];
      uvs[k * 2 + 1] = rawUvs[t * 2 + 1];
    }
  }
  return {
    positions: new Float64Array(positions),
    triangles: new Uint32Array(faceV),
    uvs,
  };
}
