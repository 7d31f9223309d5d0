// Canvas/DOM rendering for the planner: heatmap of the prediction grid
// (2+ windows render the first two free dimensions), threshold
// highlighting, pin controls and the conditional readout panel.

import type { PlannerSession } from "./planner.js";
import {
  displayedEfficiencies,
  displayedPoints,
  formatPct,
  highlightIndices,
  readout,
} from "./planner.js";

const CELL = 46;
const MARGIN = 56;

function colour(eff: number, lo: number, hi: number): string {
  const t = hi > lo ? (eff - lo) / (hi - lo) : 1.0;
  const c = Math.max(0, Math.min(1, t));
  const r = Math.round(40 + 215 * c);
  const g = Math.round(60 + 140 * c);
  const b = Math.round(120 - 60 * c);
  return `rgb(${r},${g},${b})`;
}

export function renderHeatmap(
  canvas: HTMLCanvasElement,
  session: PlannerSession,
  threshold: number,
): void {
  const points = displayedPoints(session);
  const eff = displayedEfficiencies(session);
  const ctx = canvas.getContext("2d");
  if (!ctx || points.length === 0) return;

  const dim = points[0].length;
  const xs = Array.from(new Set(points.map((p) => p[0]))).sort((a, b) => a - b);
  const ys =
    dim > 1
      ? Array.from(new Set(points.map((p) => p[1]))).sort((a, b) => a - b)
      : [0];
  canvas.width = MARGIN + xs.length * CELL + 20;
  canvas.height = MARGIN + ys.length * CELL + 20;
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  const lo = Math.min(...eff);
  const hi = Math.max(...eff);
  const highlighted = new Set(highlightIndices(eff, threshold));

  points.forEach((p, i) => {
    const cx = xs.indexOf(p[0]);
    const cy = dim > 1 ? ys.indexOf(p[1]) : 0;
    const x = MARGIN + cx * CELL;
    const y = MARGIN + (ys.length - 1 - cy) * CELL;
    ctx.fillStyle = colour(eff[i], lo, hi);
    ctx.globalAlpha = highlighted.has(i) ? 1.0 : 0.15;
    ctx.fillRect(x, y, CELL - 2, CELL - 2);
    ctx.globalAlpha = 1.0;
    ctx.fillStyle = eff[i] > 0.5 * (lo + hi) ? "#102" : "#eef";
    ctx.font = "10px sans-serif";
    ctx.fillText(formatPct(eff[i]), x + 3, y + CELL / 2);
  });

  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  xs.forEach((v, cx) => {
    ctx.fillText(String(v), MARGIN + cx * CELL + 4, MARGIN + ys.length * CELL + 14);
  });
  ys.forEach((v, cy) => {
    ctx.fillText(String(v), 8, MARGIN + (ys.length - 1 - cy) * CELL + CELL / 2);
  });
}

export function renderReadout(el: HTMLElement, session: PlannerSession): void {
  if (session.pins.size === 0 || !session.slice) {
    const best = session.surface.argmax_point;
    el.innerHTML =
      `<b>global optimum</b> at ` +
      session.surface.windows.map((w, j) => `${w} = ${best[j]}`).join(", ") +
      ` (efficiency ${formatPct(Math.max(...session.surface.eff))})`;
    return;
  }
  const r = readout(session.slice);
  const pinned = Array.from(session.pins.entries())
    .map(([n, v]) => `${n} = ${v}`)
    .join(", ");
  const rec = Object.entries(r.recommended)
    .map(([n, v]) => `${n} = ${v}`)
    .join(", ");
  el.innerHTML =
    `<b>pinned</b> ${pinned}<br>` +
    `<b>recommended</b> ${rec}<br>` +
    `<b>retained efficiency</b> ${r.retainedPct}`;
}

export function renderError(el: HTMLElement, message: string | null): void {
  el.textContent = message ?? "";
  el.style.display = message ? "block" : "none";
}
