/** CPU reference of the shading model used by the fragment shaders.
 *
 * This is the same math the GLSL in shaders.ts performs, kept in
 * TypeScript so it can be tested against pipeline-produced values and
 * used to probe single pixels from the console. Conventions:
 * cube faces are picked by the dominant axis (ties x before y before z),
 * each face is filtered independently with edge clamping, bilinear
 * coordinates snap onto integer nodes within 1e-9, and the final color
 * is clamped then sRGB-encoded.
 */

import type { Vec3 } from "./types.js";

export interface FloatImage {
  width: number;
  height: number;
  channels: number;
  data: Float64Array | Float32Array;
}

function snap(v: number): number {
  const r = Math.round(v);
  return Math.abs(v - r) < 1e-9 ? r : v;
}

/** Bilinear fetch at continuous texel coordinates with edge clamping,
 * restricted to rows [rowOffset, rowOffset + faceH). */
export function bilinearSample(
  img: FloatImage, x: number, y: number, rowOffset = 0, faceH = img.height,
): number[] {
  const w = img.width;
  const ch = img.channels;
  x = Math.min(Math.max(snap(x), 0), w - 1);
  y = Math.min(Math.max(snap(y), 0), faceH - 1);
  const x0 = Math.min(Math.floor(x), Math.max(w - 2, 0));
  const y0 = Math.min(Math.floor(y), Math.max(faceH - 2, 0));
  const x1 = Math.min(x0 + 1, w - 1);
  const y1 = Math.min(y0 + 1, faceH - 1);
  const fx = x - x0;
  const fy = y - y0;
  const at = (yy: number, xx: number, c: number) => img.data[((rowOffset + yy) * w + xx) * ch + c];
  const out = new Array<number>(ch);
  for (let c = 0; c < ch; c++) {
    const top = at(y0, x0, c) + (at(y0, x1, c) - at(y0, x0, c)) * fx;
    const bot = at(y1, x0, c) + (at(y1, x1, c) - at(y1, x0, c)) * fx;
    out[c] = top + (bot - top) * fy;
  }
  return out;
}

/** Cube face index and in-face uv for a direction; ties pick x, y, then z. */
export function faceUv(d: Vec3): { face: number; u: number; v: number } {
  const ad = [Math.abs(d[0]), Math.abs(d[1]), Math.abs(d[2])];
  let axis = 0;
  if (ad[1] > ad[0]) axis = 1;
  if (ad[2] > ad[axis]) axis = 2;
  const major = d[axis];
  const face = axis * 2 + (major < 0 ? 1 : 0);
  const bAxis = axis === 0 ? 1 : 0;
  const cAxis = axis === 2 ? 1 : 2;
  const am = Math.abs(major);
  return { face, u: (d[bAxis] / am + 1) * 0.5, v: (d[cAxis] / am + 1) * 0.5 };
}

/** Sample one basis strip (edge x 6*edge) along a unit direction. */
export function sampleStrip(strip: FloatImage, edge: number, dir: Vec3): number[] {
  const { face, u, v } = faceUv(dir);
  return bilinearSample(strip, u * edge - 0.5, v * edge - 0.5, face * edge, edge);
}

export function attenuation(lut: FloatImage, cosTheta: number, metallic: number): number {
  const n = lut.width - 1;
  const x = Math.min(Math.max(cosTheta, 0), 1) * n;
  const y = Math.min(Math.max(metallic, 0), 1) * n;
  return bilinearSample(lut, x, y)[0];
}

export function toneMap(c: number[]): number[] {
  return c.map((v) => {
    const clamped = Math.min(Math.max(v, 0), 1);
    if (clamped >= 1) return 1;
    if (clamped <= 0.0031308) return clamped * 12.92;
    return Math.min(Math.max(1.055 * Math.pow(clamped, 1 / 2.4) - 0.055, 0), 1);
  });
}

export interface ShadeInputs {
  normal: Vec3;
  /** Unit direction toward the viewer. */
  omegaO: Vec3;
  diffuse: Vec3;
  tint: Vec3;
  weights: [number, number, number, number];
  metallic: number;
}

/** Tone-mapped color: diffuse plus tinted, attenuated basis specular. */
export function shadePoint(
  inp: ShadeInputs, env: FloatImage[], edge: number, lut: FloatImage,
): Vec3 {
  const { normal: n, omegaO: wo } = inp;
  const d = wo[0] * n[0] + wo[1] * n[1] + wo[2] * n[2];
  const cosTheta = Math.min(Math.max(d, 0), 1);
  const wr: Vec3 = [2 * d * n[0] - wo[0], 2 * d * n[1] - wo[1], 2 * d * n[2] - wo[2]];
  const spec = [0, 0, 0];
  for (let b = 0; b < env.length; b++) {
    const basis = sampleStrip(env[b], edge, wr);
    for (let c = 0; c < 3; c++) spec[c] += inp.weights[b] * basis[c];
  }
  for (let c = 0; c < 3; c++) spec[c] = Math.min(Math.max(spec[c], 0), 1);
  const a = attenuation(lut, cosTheta, inp.metallic);
  const rgb = [
    inp.diffuse[0] + inp.tint[0] * (a * spec[0]),
    inp.diffuse[1] + inp.tint[1] * (a * spec[1]),
    inp.diffuse[2] + inp.tint[2] * (a * spec[2]),
  ];
  return toneMap(rgb) as Vec3;
}
