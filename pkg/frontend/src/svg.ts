/**
 * Minimal deterministic SVG emission.
 *
 * Figures are built as plain strings with stable number formatting, so the
 * same inputs always produce byte-identical files (no timestamps, no
 * randomized ids).
 */

export interface Series {
  name: string;
  x: number[];
  y: number[];
  /** stroke color; picked from a fixed palette when omitted */
  color?: string;
  /** dash pattern, e.g. "4 3" for reference curves */
  dash?: string;
}

export interface LineFigureSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  width?: number;
  height?: number;
}

export interface HistogramSpec {
  title: string;
  xLabel: string;
  binEdges: number[];
  counts: number[];
  width?: number;
  height?: number;
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
const MARGIN = { top: 34, right: 16, bottom: 42, left: 56 };

/** Stable short decimal formatting (no exponent drift across platforms). */
export function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  const s = Number(v.toPrecision(8)).toString();
  return s === "-0" ? "0" : s;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) return [0, 1];
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  return [lo, hi];
}

function ticks(lo: number, hi: number, n = 5): number[] {
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const candidates = [step, 2 * step, 5 * step, 10 * step];
  const pick = candidates.find((s) => span / s <= n) ?? 10 * step;
  const out: number[] = [];
  for (let v = Math.ceil(lo / pick) * pick; v <= hi + 1e-12 * span; v += pick) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderLineFigure(spec: LineFigureSpec): string {
  const width = spec.width ?? 640;
  const height = spec.height ?? 420;
  const iw = width - MARGIN.left - MARGIN.right;
  const ih = height - MARGIN.top - MARGIN.bottom;
  const allX = spec.series.flatMap((s) => s.x);
  const allY = spec.series.flatMap((s) => s.y);
  const [x0, x1] = extent(allX);
  const [y0, y1] = extent(allY);
  const sx = (v: number) => MARGIN.left + ((v - x0) / (x1 - x0)) * iw;
  const sy = (v: number) => MARGIN.top + ih - ((v - y0) / (y1 - y0)) * ih;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">${esc(spec.title)}</text>`,
  );
  // axes
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + ih}" x2="${MARGIN.left + iw}" y2="${MARGIN.top + ih}" stroke="black"/>`,
  );
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${MARGIN.top + ih}" stroke="black"/>`,
  );
  for (const t of ticks(x0, x1)) {
    const px = fmt(sx(t));
    parts.push(
      `<line x1="${px}" y1="${MARGIN.top + ih}" x2="${px}" y2="${MARGIN.top + ih + 5}" stroke="black"/>`,
    );
    parts.push(
      `<text x="${px}" y="${MARGIN.top + ih + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">${fmt(t)}</text>`,
    );
  }
  for (const t of ticks(y0, y1)) {
    const py = fmt(sy(t));
    parts.push(
      `<line x1="${MARGIN.left - 5}" y1="${py}" x2="${MARGIN.left}" y2="${py}" stroke="black"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${py}" text-anchor="end" dominant-baseline="middle" font-family="sans-serif" font-size="11">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${MARGIN.left + iw / 2}" y="${height - 8}" text-anchor="middle" font-family="sans-serif" font-size="12">${esc(spec.xLabel)}</text>`,
  );
  parts.push(
    `<text x="14" y="${MARGIN.top + ih / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 ${MARGIN.top + ih / 2})">${esc(spec.yLabel)}</text>`,
  );
  // series
  spec.series.forEach((s, i) => {
    const color = s.color ?? PALETTE[i % PALETTE.length];
    const pts = s.x
      .map((vx, j) => `${fmt(sx(vx))},${fmt(sy(s.y[j] as number))}`)
      .join(" ");
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"${dash}/>`,
    );
    parts.push(
      `<text x="${MARGIN.left + iw - 4}" y="${MARGIN.top + 14 + 14 * i}" text-anchor="end" font-family="sans-serif" font-size="11" fill="${color}">${esc(s.name)}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

export function renderHistogram(spec: HistogramSpec): string {
  const width = spec.width ?? 640;
  const height = spec.height ?? 420;
  const iw = width - MARGIN.left - MARGIN.right;
  const ih = height - MARGIN.top - MARGIN.bottom;
  const x0 = spec.binEdges[0] as number;
  const x1 = spec.binEdges[spec.binEdges.length - 1] as number;
  const yMax = Math.max(1, ...spec.counts);
  const sx = (v: number) => MARGIN.left + ((v - x0) / (x1 - x0)) * iw;
  const sy = (v: number) => MARGIN.top + ih - (v / yMax) * ih;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">${esc(spec.title)}</text>`,
  );
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + ih}" x2="${MARGIN.left + iw}" y2="${MARGIN.top + ih}" stroke="black"/>`,
  );
  spec.counts.forEach((c, i) => {
    const l = sx(spec.binEdges[i] as number);
    const r = sx(spec.binEdges[i + 1] as number);
    parts.push(
      `<rect x="${fmt(l)}" y="${fmt(sy(c))}" width="${fmt(r - l)}" height="${fmt(MARGIN.top + ih - sy(c))}" fill="#1f77b4" stroke="white" stroke-width="0.5"/>`,
    );
  });
  for (const t of ticks(x0, x1)) {
    const px = fmt(sx(t));
    parts.push(
      `<text x="${px}" y="${MARGIN.top + ih + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${MARGIN.left + iw / 2}" y="${height - 8}" text-anchor="middle" font-family="sans-serif" font-size="12">${esc(spec.xLabel)}</text>`,
  );
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
