/** 8-bit quantization codec mirroring the container's arithmetic.
 *
 * Encode rounds half away from zero (Math.round) after clamping, so the
 * byte produced here is exactly the byte the baker stored for the same
 * float input.
 */

export function quantizeValue(v: number, lo: number, hi: number): number {
  const t = Math.min(Math.max((v - lo) / (hi - lo), 0), 1);
  return Math.min(Math.floor(t * 255 + 0.5), 255);
}

export function dequantizeValue(q: number, lo: number, hi: number): number {
  return lo + (q / 255) * (hi - lo);
}

/** Decode an interleaved u8 image into float32, channel ranges applied. */
export function dequantizeImage(
  data: Uint8Array, channels: number, lo: number[], hi: number[],
): Float32Array {
  if (lo.length !== channels || hi.length !== channels) {
    throw new Error(`range length mismatch: ${lo.length}/${hi.length} vs ${channels}`);
  }
  const out = new Float32Array(data.length);
  for (let i = 0; i < data.length; i++) {
    const c = i % channels;
    out[i] = lo[c] + (data[i] / 255) * (hi[c] - lo[c]);
  }
  return out;
}

/** The display rounding used when a float frame becomes 8-bit pixels. */
export function frameToU8(v: number): number {
  return Math.floor(Math.min(Math.max(v, 0), 1) * 255 + 0.5);
}
