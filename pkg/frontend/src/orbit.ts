/** Orbit camera state: azimuth/elevation/distance around a target point.
 *
 * Mapping contract: a horizontal drag across the full canvas width turns
 * azimuth by 360 degrees times the sensitivity; a full-height vertical
 * drag covers 180 degrees of elevation. Wheel zoom is exponential and the
 * distance never drops below MIN_DISTANCE. Reset restores the initial
 * state exactly (same numbers, not a re-derivation).
 */

import type { Vec3 } from "./types.js";

export const MIN_DISTANCE = 0.1;
export const MAX_ELEVATION_DEG = 89.9;

export interface OrbitState {
  azimuthDeg: number;
  elevationDeg: number;
  distance: number;
  target: Vec3;
}

export class OrbitControls {
  state: OrbitState;
  readonly sensitivity: number;
  private readonly initial: OrbitState;

  constructor(initial: OrbitState, sensitivity = 1.0) {
    if (!(initial.distance > 0)) throw new Error("orbit distance must be positive");
    if (Math.abs(initial.elevationDeg) >= 90) throw new Error("orbit elevation must be inside (-90, 90)");
    this.initial = { ...initial, target: [...initial.target] };
    this.state = { ...initial, target: [...initial.target] };
    this.sensitivity = sensitivity;
  }

  drag(dxPixels: number, dyPixels: number, canvasW: number, canvasH: number): void {
    this.state.azimuthDeg += (dxPixels / canvasW) * 360 * this.sensitivity;
    const el = this.state.elevationDeg + (dyPixels / canvasH) * 180 * this.sensitivity;
    this.state.elevationDeg = Math.min(Math.max(el, -MAX_ELEVATION_DEG), MAX_ELEVATION_DEG);
  }

  /** deltaY > 0 (wheel down) moves away, < 0 moves closer; clamped. */
  wheel(deltaY: number): void {
    const next = this.state.distance * Math.exp(deltaY * 0.001);
    this.state.distance = Math.max(next, MIN_DISTANCE);
  }

  reset(): void {
    this.state = { ...this.initial, target: [...this.initial.target] };
  }

  /** Camera position on the y-up orbit sphere. */
  position(): Vec3 {
    const az = (this.state.azimuthDeg * Math.PI) / 180;
    const el = (this.state.elevationDeg * Math.PI) / 180;
    const r = this.state.distance;
    const t = this.state.target;
    return [
      t[0] + r * Math.cos(el) * Math.cos(az),
      t[1] + r * Math.sin(el),
      t[2] + r * Math.cos(el) * Math.sin(az),
    ];
  }
}
