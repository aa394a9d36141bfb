/** Deterministic SVG line charts: fixed precision, no timestamps. */

import type { Series } from "./metrics.js";

const WIDTH = 720;
const HEIGHT = 400;
const MARGIN = { left: 56, right: 16, top: 20, bottom: 36 };
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function fmt(x: number): string {
  return x.toFixed(2);
}

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const step = (hi - lo) / (count - 1);
  return Array.from({ length: count }, (_, i) => lo + i * step);
}

export function renderCurves(series: Series[], boundaries: number[]): string {
  const n = Math.max(...series.map((s) => s.values.length));
  const all = series.flatMap((s) => s.values);
  let lo = Math.min(...all);
  let hi = Math.max(...all);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const px = (i: number) => MARGIN.left + (n <= 1 ? 0 : (i / (n - 1)) * plotW);
  const py = (v: number) => MARGIN.top + (1 - (v - lo) / (hi - lo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="monospace" font-size="11">`);
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  for (const t of niceTicks(lo, hi)) {
    const y = fmt(py(t));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y}" x2="${WIDTH - MARGIN.right}" y2="${y}" ` +
      `stroke="#dddddd" stroke-width="1"/>`);
    parts.push(`<text x="4" y="${fmt(py(t) + 4)}" fill="#444444">${t.toPrecision(3)}</text>`);
  }
  for (const b of boundaries) {
    const x = fmt(px(b - 0.5));
    parts.push(
      `<line x1="${x}" y1="${MARGIN.top}" x2="${x}" y2="${HEIGHT - MARGIN.bottom}" ` +
      `stroke="#999999" stroke-width="1" stroke-dasharray="4,3"/>`);
  }
  series.forEach((s, si) => {
    const color = COLORS[si % COLORS.length];
    if (s.values.length === 1) {
      parts.push(
        `<circle cx="${fmt(px(0))}" cy="${fmt(py(s.values[0]))}" r="3" fill="${color}"/>`);
    } else {
      const pts = s.values.map((v, i) => `${fmt(px(i))},${fmt(py(v))}`).join(" ");
      parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
    }
    const ly = MARGIN.top + 14 * (si + 1);
    parts.push(`<rect x="${WIDTH - 180}" y="${ly - 9}" width="10" height="10" fill="${color}"/>`);
    parts.push(`<text x="${WIDTH - 166}" y="${ly}" fill="#222222">${s.key}</text>`);
  });
  parts.push(
    `<text x="${MARGIN.left}" y="${HEIGHT - 8}" fill="#444444">epoch (rows; dashed = phase boundary)</text>`);
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
