/** Orbit controls: spherical placement, drag/zoom mapping, clamps, reset. */

import { describe, expect, it } from "vitest";

import { MAX_ELEVATION_DEG, MIN_DISTANCE, OrbitControls } from "../src/orbit.js";
import { expected } from "./helpers.js";

describe("orbit position", () => {
  it("matches the pipeline's orbit placement", () => {
    for (const c of expected.orbit) {
      const orbit = new OrbitControls({
        azimuthDeg: c.azimuth,
        elevationDeg: c.elevation,
        distance: c.distance,
        target: c.target as [number, number, number],
      });
      const pos = orbit.position();
      for (let i = 0; i < 3; i++) {
        expect(pos[i]).toBeCloseTo(c.position[i], 12);
      }
    }
  });
});

describe("interaction", () => {
  const start = () =>
    new OrbitControls({ azimuthDeg: 10, elevationDeg: 20, distance: 2.5, target: [0, 0, 0] });

  it("full-width drag turns azimuth by 360 degrees", () => {
    const o = start();
    o.drag(800, 0, 800, 600);
    expect(o.state.azimuthDeg).toBeCloseTo(370, 12);
  });

  it("clamps elevation short of the poles", () => {
    const o = start();
    o.drag(0, 10_000, 800, 600);
    expect(o.state.elevationDeg).toBe(MAX_ELEVATION_DEG);
    o.drag(0, -100_000, 800, 600);
    expect(o.state.elevationDeg).toBe(-MAX_ELEVATION_DEG);
  });

  it("wheel zoom is exponential and clamped", () => {
    const o = start();
    o.wheel(1000);
    expect(o.state.distance).toBeCloseTo(2.5 * Math.E, 10);
    o.wheel(-1000);
    expect(o.state.distance).toBeCloseTo(2.5, 10);
    o.wheel(-1e7);
    expect(o.state.distance).toBe(MIN_DISTANCE);
  });

  it("reset restores the initial state exactly", () => {
    const o = start();
    o.drag(123, -45, 800, 600);
    o.wheel(500);
    o.state.target[0] = 9;
    o.reset();
    expect(o.state).toEqual({ azimuthDeg: 10, elevationDeg: 20, distance: 2.5, target: [0, 0, 0] });
  });

  it("rejects degenerate initial states", () => {
    expect(() => new OrbitControls({ azimuthDeg: 0, elevationDeg: 0, distance: 0, target: [0, 0, 0] }))
      .toThrow("distance");
    expect(() => new OrbitControls({ azimuthDeg: 0, elevationDeg: 90, distance: 1, target: [0, 0, 0] }))
      .toThrow("elevation");
  });
});
