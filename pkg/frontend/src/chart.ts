// Canvas rendering for the rolling pressure trace. Pure coordinate helpers
// are exported for tests; the draw call itself only touches the 2D context.

import { decimateMinMax, Point } from "./decimate.js";

export interface Band {
  lo: number;
  hi: number;
}

export interface ChartLayout {
  width: number;
  height: number;
  padLeft: number;
  padBottom: number;
}

export interface Scale {
  x: (t: number) => number;
  y: (v: number) => number;
}

export function makeScale(
  layout: ChartLayout,
  t0: number,
  t1: number,
  vMin: number,
  vMax: number,
): Scale {
  const plotW = layout.width - layout.padLeft;
  const plotH = layout.height - layout.padBottom;
  const dv = vMax - vMin || 1;
  const dt = t1 - t0 || 1;
  return {
    x: (t) => layout.padLeft + ((t - t0) / dt) * plotW,
    y: (v) => plotH - ((v - vMin) / dv) * plotH,
  };
}

/** Value range covering the data and the target band, with 5% headroom. */
export function valueRange(points: readonly Point[], band: Band | null): [number, number] {
  let lo = band ? band.lo : Infinity;
  let hi = band ? band.hi : -Infinity;
  for (const p of points) {
    if (p.v < lo) lo = p.v;
    if (p.v > hi) hi = p.v;
  }
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  const pad = 0.05 * (hi - lo);
  return [lo - pad, hi + pad];
}

export interface DrawOptions {
  layout: ChartLayout;
  windowS: number;
  band: Band | null;
  unit: string;
  stale: boolean;
}

export function drawChart(
  ctx: CanvasRenderingContext2D,
  points: readonly Point[],
  tLatest: number,
  opts: DrawOptions,
): void {
  const { layout, windowS, band, unit, stale } = opts;
  ctx.clearRect(0, 0, layout.width, layout.height);
  ctx.fillStyle = "#10151c";
  ctx.fillRect(0, 0, layout.width, layout.height);

  const t1 = tLatest;
  const t0 = t1 - windowS;
  const columns = Math.max(1, Math.floor(layout.width - layout.padLeft));
  const visible = decimateMinMax(points, t0, t1, columns);
  const [vMin, vMax] = valueRange(visible, band);
  const scale = makeScale(layout, t0, t1, vMin, vMax);

  if (band) {
    ctx.fillStyle = "rgba(80, 200, 120, 0.15)";
    const yHi = scale.y(band.hi);
    const yLo = scale.y(band.lo);
    ctx.fillRect(layout.padLeft, yHi, layout.width - layout.padLeft, yLo - yHi);
    ctx.strokeStyle = "rgba(80, 200, 120, 0.6)";
    ctx.setLineDash([4, 4]);
    for (const edge of [band.lo, band.hi]) {
      ctx.beginPath();
      ctx.moveTo(layout.padLeft, scale.y(edge));
      ctx.lineTo(layout.width, scale.y(edge));
      ctx.stroke();
    }
    ctx.setLineDash([]);
  }

  ctx.strokeStyle = "#39414d";
  ctx.strokeRect(layout.padLeft, 0, layout.width - layout.padLeft,
                 layout.height - layout.padBottom);

  ctx.fillStyle = "#9aa7b5";
  ctx.font = "11px system-ui, sans-serif";
  ctx.fillText(`${vMax.toFixed(0)} ${unit}`, 2, 12);
  ctx.fillText(`${vMin.toFixed(0)} ${unit}`, 2, layout.height - layout.padBottom - 2);
  ctx.fillText(`${windowS.toFixed(0)} s window`, layout.padLeft + 4,
               layout.height - 4);

  if (stale || visible.length === 0) {
    ctx.fillStyle = "#e0b04b";
    ctx.font = "16px system-ui, sans-serif";
    ctx.fillText("no signal", layout.width / 2 - 32, layout.height / 2);
    return;
  }

  ctx.strokeStyle = "#4db8ff";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  visible.forEach((p, i) => {
    const x = scale.x(p.t);
    const y = scale.y(p.v);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}
