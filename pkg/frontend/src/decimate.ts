// Min/max decimation for render performance: at most 2 points per pixel
// column, preserving every excursion the eye could see. Raw data is never
// touched; this only shapes what gets drawn.

export interface Point {
  t: number;
  v: number;
}

/**
 * Reduce time-ordered points to <= 2 per pixel column over [t0, t1].
 * Points outside the window are ignored. Output stays time-ordered.
 */
export function decimateMinMax(
  points: readonly Point[],
  t0: number,
  t1: number,
  columns: number,
): Point[] {
  if (columns < 1 || t1 <= t0) return [];
  const width = t1 - t0;
  const out: Point[] = [];
  let col = -1;
  let lo: Point | null = null;
  let hi: Point | null = null;

  const flush = () => {
    if (lo === null || hi === null) return;
    if (lo === hi) {
      out.push(lo);
    } else if (lo.t <= hi.t) {
      out.push(lo, hi);
    } else {
      out.push(hi, lo);
    }
  };

  for (const p of points) {
    if (p.t < t0 || p.t > t1) continue;
    const c = Math.min(columns - 1, Math.floor(((p.t - t0) / width) * columns));
    if (c !== col) {
      flush();
      col = c;
      lo = hi = p;
      continue;
    }
    if (lo === null || p.v < lo.v) lo = p;
    if (hi === null || p.v > hi.v) hi = p;
  }
  flush();
  return out;
}
