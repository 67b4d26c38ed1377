/** Perfect-spatial-hash slot lookup, identical to the baker's integer math.
 *
 * slot = (block mod m + offsets[block mod r] mod r) mod m, per component.
 * The offset table is stored as an (r^2, r) RGB image: entry (x, y, z)
 * sits at row z*r + y, column x.
 */

export interface OffsetTable {
  rBar: number;
  mBar: number;
  /** RGB bytes of the offsets image, row-major, 3 per entry. */
  data: Uint8Array;
}

export function pshSlot(
  table: OffsetTable, bx: number, by: number, bz: number,
): [number, number, number] {
  const { mBar, rBar, data } = table;
  const ox = bx % rBar;
  const oy = by % rBar;
  const oz = bz % rBar;
  const base = ((oz * rBar + oy) * rBar + ox) * 3;
  return [
    (bx % mBar + data[base] % rBar) % mBar,
    (by % mBar + data[base + 1] % rBar) % mBar,
    (bz % mBar + data[base + 2] % rBar) % mBar,
  ];
}

/** Texel coordinate of a voxel inside the brick atlas (x, then row z*D+y). */
export function brickTexel(
  table: OffsetTable, block: number, vx: number, vy: number, vz: number,
): [number, number] {
  const bx = Math.floor(vx / block);
  const by = Math.floor(vy / block);
  const bz = Math.floor(vz / block);
  const [sx, sy, sz] = pshSlot(table, bx, by, bz);
  const tx = sx * block + (vx - bx * block);
  const ty = sy * block + (vy - by * block);
  const tz = sz * block + (vz - bz * block);
  const dim = table.mBar * block;
  return [tx, tz * dim + ty];
}
