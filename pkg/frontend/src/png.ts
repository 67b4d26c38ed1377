/** Minimal PNG decoder for the container payloads.
 *
 * The browser canvas path premultiplies alpha, which corrupts low-alpha
 * texels in the RGBA weights map, so the viewer decodes PNGs itself.
 * Supports exactly what the container writer emits: 8-bit depth,
 * grayscale / RGB / RGBA, non-interlaced. Inflate comes from the
 * standard DecompressionStream, available in browsers and node alike.
 */

export interface DecodedPng {
  width: number;
  height: number;
  /** 1, 3, or 4. */
  channels: number;
  /** Interleaved rows, width * height * channels bytes. */
  data: Uint8Array;
}

const SIGNATURE = [137, 80, 78, 71, 13, 10, 26, 10];

const COLOR_CHANNELS: Record<number, number> = { 0: 1, 2: 3, 6: 4 };

async function inflate(compressed: Uint8Array): Promise<Uint8Array> {
  const stream = new DecompressionStream("deflate");
  const writer = stream.writable.getWriter();
  void writer.write(compressed.slice());
  void writer.close();
  const chunks: Uint8Array[] = [];
  const reader = stream.readable.getReader();
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    chunks.push(value);
  }
  let total = 0;
  for (const c of chunks) total += c.length;
  const out = new Uint8Array(total);
  let at = 0;
  for (const c of chunks) {
    out.set(c, at);
    at += c.length;
  }
  return out;
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function unfilter(raw: Uint8Array, width: number, height: number, channels: number): Uint8Array {
  const stride = width * channels;
  if (raw.length !== (stride + 1) * height) {
    throw new Error("PNG pixel data has the wrong length");
  }
  const out = new Uint8Array(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[(stride + 1) * y];
    const src = (stride + 1) * y + 1;
    const dst = stride * y;
    for (let x = 0; x < stride; x++) {
      const cur = raw[src + x];
      const left = x >= channels ? out[dst + x - channels] : 0;
      const up = y > 0 ? out[dst + x - stride] : 0;
      const upLeft = y > 0 && x >= channels ? out[dst + x - channels - stride] : 0;
      let v: number;
      switch (filter) {
        case 0: v = cur; break;
        case 1: v = cur + left; break;
        case 2: v = cur + up; break;
        case 3: v = cur + ((left + up) >> 1); break;
        case 4: v = cur + paeth(left, up, upLeft); break;
        default: throw new Error(`PNG row ${y}: unknown filter ${filter}`);
      }
      out[dst + x] = v & 0xff;
    }
  }
  return out;
}

export async function decodePng(bytes: Uint8Array): Promise<DecodedPng> {
  if (bytes.length < 8 || SIGNATURE.some((b, i) => bytes[i] !== b)) {
    throw new Error("not a PNG file");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let at = 8;
  let width = 0;
  let height = 0;
  let channels = 0;
  const idat: Uint8Array[] = [];
  let sawEnd = false;
  while (at + 8 <= bytes.length) {
    const length = view.getUint32(at);
    const type = String.fromCharCode(bytes[at + 4], bytes[at + 5], bytes[at + 6], bytes[at + 7]);
    const dataAt = at + 8;
    if (dataAt + length + 4 > bytes.length) {
      throw new Error(`PNG chunk ${type} overruns the file`);
    }
    if (type === "IHDR") {
      width = view.getUint32(dataAt);
      height = view.getUint32(dataAt + 4);
      const bitDepth = bytes[dataAt + 8];
      const colorType = bytes[dataAt + 9];
      const interlace = bytes[dataAt + 12];
      if (bitDepth !== 8) throw new Error(`unsupported PNG bit depth ${bitDepth}`);
      if (!(colorType in COLOR_CHANNELS)) throw new Error(`unsupported PNG color type ${colorType}`);
      if (interlace !== 0) throw new Error("interlaced PNGs are not supported");
      channels = COLOR_CHANNELS[colorType];
    } else if (type === "IDAT") {
      idat.push(bytes.subarray(dataAt, dataAt + length));
    } else if (type === "IEND") {
      sawEnd = true;
      break;
    }
    at = dataAt + length + 4;
  }
  if (width <= 0 || height <= 0 || channels === 0) throw new Error("PNG is missing IHDR");
  if (!sawEnd) throw new Error("PNG is missing IEND");
  let total = 0;
  for (const c of idat) total += c.length;
  const compressed = new Uint8Array(total);
  let o = 0;
  for (const c of idat) {
    compressed.set(c, o);
    o += c.length;
  }
  const raw = await inflate(compressed);
  return { width, height, channels, data: unfilter(raw, width, height, channels) };
}
