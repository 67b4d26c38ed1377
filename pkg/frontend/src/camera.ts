/** Pinhole camera matching the asset pipeline's conventions.
 *
 * Vertical field of view; pixel (0, 0) is the top-left pixel and rays pass
 * through pixel centers; basis is right = unit(up x fwd), up = fwd x right.
 */

import type { Vec3 } from "./types.js";

export interface Camera {
  position: Vec3;
  lookAt: Vec3;
  up: Vec3;
  fovDeg: number;
  width: number;
  height: number;
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function normalize(a: Vec3): Vec3 {
  const len = Math.hypot(a[0], a[1], a[2]);
  if (len === 0) throw new Error("cannot normalize a zero vector");
  return [a[0] / len, a[1] / len, a[2] / len];
}

export function basis(cam: Camera): { right: Vec3; up: Vec3; fwd: Vec3 } {
  const fwd = normalize(sub(cam.lookAt, cam.position));
  const right = normalize(cross(cam.up, fwd));
  const up = cross(fwd, right);
  return { right, up, fwd };
}

export function tangents(cam: Camera): { tanH: number; tanV: number } {
  const tanV = Math.tan(((cam.fovDeg * Math.PI) / 180) / 2);
  return { tanH: (tanV * cam.width) / cam.height, tanV };
}

/** Unit direction through the center of pixel (px, py), top-left origin. */
export function pixelRay(cam: Camera, px: number, py: number): Vec3 {
  const { right, up, fwd } = basis(cam);
  const { tanH, tanV } = tangents(cam);
  const ndcX = ((px + 0.5) * 2) / cam.width - 1;
  const ndcY = 1 - ((py + 0.5) * 2) / cam.height;
  return normalize([
    ndcX * tanH * right[0] + ndcY * tanV * up[0] + fwd[0],
    ndcX * tanH * right[1] + ndcY * tanV * up[1] + fwd[1],
    ndcX * tanH * right[2] + ndcY * tanV * up[2] + fwd[2],
  ]);
}

/** Column-major view-projection matrix reproducing the same projection.
 *
 * Clip x/w = x_cam / (tanH * z_cam) and y/w = y_cam / (tanV * z_cam),
 * which lands world points on exactly the pixels the ray math addresses.
 * Depth is the usual hyperbolic map of z_cam in [near, far] onto [-1, 1].
 */
export function viewProjection(cam: Camera, near = 0.01, far = 100): Float32Array {
  const { right, up, fwd } = basis(cam);
  const { tanH, tanV } = tangents(cam);
  const p = cam.position;
  // view rows: x_cam = right . (w - p), y_cam = up . (w - p), z_cam = fwd . (w - p)
  const a = (far + near) / (far - near);
  const b = (-2 * far * near) / (far - near);
  const rows = [
    [right[0] / tanH, right[1] / tanH, right[2] / tanH],
    [up[0] / tanV, up[1] / tanV, up[2] / tanV],
    [fwd[0] * a, fwd[1] * a, fwd[2] * a],
    [fwd[0], fwd[1], fwd[2]],
  ];
  const dots = rows.map((r) => -(r[0] * p[0] + r[1] * p[1] + r[2] * p[2]));
  dots[2] += b;
  // column-major 4x4: clip = M * world
  const m = new Float32Array(16);
  for (let col = 0; col < 3; col++) {
    for (let row = 0; row < 4; row++) m[col * 4 + row] = rows[row][col];
  }
  for (let row = 0; row < 4; row++) m[12 + row] = dots[row];
  return m;
}
