/** The PNG decoder must reproduce the exact bytes the bake wrote. */

import { createHash } from "node:crypto";
import { describe, expect, it } from "vitest";

import { decodePng } from "../src/png.js";
import { expected, fixtureBytes } from "./helpers.js";

function sha256(data: Uint8Array): string {
  return createHash("sha256").update(data).digest("hex");
}

const cases = [
  ...expected.hybrid.files.map((f) => ({ dir: expected.hybrid.dir, ...f })),
  ...expected.mesh_only.files.map((f) => ({ dir: expected.mesh_only.dir, ...f })),
];

describe("decodePng", () => {
  for (const c of cases.filter((f) => f.file.endsWith(".png"))) {
    it(`decodes ${c.dir}/${c.file} bit for bit`, async () => {
      const img = await decodePng(fixtureBytes(c.dir, c.file));
      expect(img.width).toBe(c.width);
      expect(img.height).toBe(c.height);
      expect(img.channels).toBe(c.channels);
      expect(img.data.length).toBe(c.width! * c.height! * c.channels!);
      expect(sha256(img.data)).toBe(c.sha256);
    });
  }

  for (const c of cases.filter((f) => !f.file.endsWith(".png") && f.file !== "manifest.json")) {
    it(`raw payload ${c.dir}/${c.file} matches its digest`, () => {
      const data = fixtureBytes(c.dir, c.file);
      expect(data.length).toBe(c.bytes);
      expect(sha256(data)).toBe(c.sha256);
    });
  }

  it("rejects non-PNG data", async () => {
    await expect(decodePng(new Uint8Array([1, 2, 3, 4]))).rejects.toThrow("not a PNG");
  });

  it("rejects a truncated file", async () => {
    const good = fixtureBytes(expected.hybrid.dir, "lut.png");
    await expect(decodePng(good.slice(0, 40))).rejects.toThrow();
  });
});
