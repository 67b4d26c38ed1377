/** Quantization arithmetic must agree with the bake's rounding exactly. */

import { describe, expect, it } from "vitest";

import { dequantizeImage, dequantizeValue, frameToU8, quantizeValue } from "../src/quant.js";
import { expected } from "./helpers.js";

describe("quantization", () => {
  it("matches the pipeline's floor(x*255 + 0.5) rounding", () => {
    for (const c of expected.quant) {
      expect(quantizeValue(c.value, c.lo, c.hi)).toBe(c.q);
      expect(dequantizeValue(c.q, c.lo, c.hi)).toBeCloseTo(c.dequantized, 12);
    }
  });

  it("is idempotent across a store-load cycle", () => {
    for (let q = 0; q <= 255; q++) {
      const v = dequantizeValue(q, -3.5, 11.25);
      expect(quantizeValue(v, -3.5, 11.25)).toBe(q);
    }
  });

  it("dequantizes interleaved images channel by channel", () => {
    const data = new Uint8Array([0, 128, 255, 51, 102, 204]);
    const out = dequantizeImage(data, 3, [0, 0, -1], [1, 2, 1]);
    const want = [0, 2 * (128 / 255), -1 + 2 * (255 / 255), 51 / 255, 2 * (102 / 255), -1 + 2 * (204 / 255)];
    for (let i = 0; i < want.length; i++) {
      expect(out[i]).toBeCloseTo(want[i], 6);
    }
  });

  it("clamps and rounds frame values to bytes", () => {
    expect(frameToU8(-0.2)).toBe(0);
    expect(frameToU8(0)).toBe(0);
    expect(frameToU8(1)).toBe(255);
    expect(frameToU8(2)).toBe(255);
    expect(frameToU8(0.5)).toBe(Math.floor(0.5 * 255 + 0.5));
  });
});
