/** Occupancy bitfield addressing: voxel (x, y, z) -> bit x + n*(y + n*z),
 * least-significant bit first within each byte. */

export function occupancyBit(bytes: Uint8Array, n: number, x: number, y: number, z: number): boolean {
  const idx = x + n * (y + n * z);
  return (bytes[idx >> 3] >> (idx & 7) & 1) === 1;
}

export function popcount(bytes: Uint8Array): number {
  let total = 0;
  for (let i = 0; i < bytes.length; i++) {
    let b = bytes[i];
    while (b) {
      b &= b - 1;
      total++;
    }
  }
  return total;
}

/** Coordinates of every block (grid of n/block per axis) holding any set bit. */
export function occupiedBlocks(bytes: Uint8Array, n: number, block: number): [number, number, number][] {
  const nb = n / block;
  const out: [number, number, number][] = [];
  for (let bz = 0; bz < nb; bz++) {
    for (let by = 0; by < nb; by++) {
      for (let bx = 0; bx < nb; bx++) {
        let found = false;
        for (let lz = 0; lz < block && !found; lz++) {
          for (let ly = 0; ly < block && !found; ly++) {
            const rowBase = bx * block + n * (by * block + ly + n * (bz * block + lz));
            for (let lx = 0; lx < block; lx++) {
              const idx = rowBase + lx;
              if ((bytes[idx >> 3] >> (idx & 7) & 1) === 1) {
                found = true;
                break;
              }
            }
          }
        }
        if (found) out.push([bx, by, bz]);
      }
    }
  }
  return out;
}
