/**
 * Figure builders for localization experiment outputs.
 *
 * Each builder turns parsed CSV tables (and the summary JSON of named
 * checks) into an SVG string, plus an optional JSON data sidecar with the
 * exact numbers that were drawn.
 */

import { Table, column } from "./csv";
import {
  renderLineFigure,
  renderHistogram,
  Series,
} from "./svg";

export const FIGURE_KINDS = [
  "spectrum-decay",
  "variance-envelope",
  "martingale-residuals",
  "coupling-identity",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface SummaryCheck {
  value: number | null;
  ci: [number, number] | null;
  status: string;
}

export type Summary = Record<string, SummaryCheck>;

export interface Figure {
  svg: string;
  /** numeric data behind the figure, written alongside the SVG */
  data?: Record<string, unknown>;
}

const TRAJ_COLOR = "#9ecae1";

function eigColumns(table: Table): number[][] {
  const idxs = table.columns
    .map((c, i) => (/^eig_\d+$/.test(c) ? i : -1))
    .filter((i) => i >= 0);
  if (idxs.length === 0) {
    throw new Error(
      `trajectory table has no eigenvalue columns (have: ${table.columns.join(", ")})`,
    );
  }
  return table.rows.map((r) => idxs.map((i) => r[i] as number));
}

/**
 * Largest covariance eigenvalue along each trajectory, with the e^{-t}
 * envelope that the isotropic start guarantees in the Gaussian case.
 */
export function spectrumDecay(trajectories: Table[]): Figure {
  if (trajectories.length === 0) {
    throw new Error("spectrum-decay needs at least one trajectory");
  }
  const series: Series[] = trajectories.map((tr, i) => ({
    name: i === 0 ? "trajectories" : "",
    x: column(tr, "t"),
    y: eigColumns(tr).map((eigs) => Math.max(...eigs)),
    color: TRAJ_COLOR,
  }));
  const t = column(trajectories[0] as Table, "t");
  const reference = t.map((v) => Math.exp(-v));
  series.push({
    name: "exp(-t) reference",
    x: t,
    y: reference,
    color: "#d62728",
    dash: "5 3",
  });
  return {
    svg: renderLineFigure({
      title: "Covariance operator norm along trajectories",
      xLabel: "t",
      yLabel: "largest eigenvalue of A_t",
      series,
    }),
    data: { t, reference },
  };
}

/**
 * Variance of the localized set mass against time, with the quadratic
 * variation budget line var <= t that a martingale of bounded rate obeys.
 */
export function varianceEnvelope(massProcess: Table): Figure {
  const t = column(massProcess, "t");
  const varG = column(massProcess, "var_g");
  const qvRate = column(massProcess, "qv_rate");
  const budget = t.map((v, i) => (qvRate[i] as number) * v);
  return {
    svg: renderLineFigure({
      title: "Set-mass variance vs quadratic-variation budget",
      xLabel: "t",
      yLabel: "variance",
      series: [
        { name: "var g_t", x: t, y: varG, color: "#1f77b4" },
        { name: "qv rate * t", x: t, y: budget, color: "#d62728", dash: "5 3" },
      ],
    }),
    data: { t, var_g: varG, budget },
  };
}

function histogram(values: number[], nBins: number): { edges: number[]; counts: number[] } {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const edges = Array.from({ length: nBins + 1 }, (_, i) => lo + ((hi - lo) * i) / nBins);
  const counts = new Array<number>(nBins).fill(0);
  for (const v of values) {
    let b = Math.floor(((v - lo) / (hi - lo)) * nBins);
    if (b === nBins) b = nBins - 1;
    counts[b] = (counts[b] as number) + 1;
  }
  return { edges, counts };
}

/**
 * Distribution of the conserved-trace drift per trajectory.  The companion
 * trace starts at the dimension and is a martingale, so end minus start
 * residuals should scatter around zero; the summary checks are listed in
 * the subtitle so figure and verdict travel together.
 */
export function martingaleResiduals(trajectories: Table[], summary: Summary): Figure {
  if (trajectories.length === 0) {
    throw new Error("martingale-residuals needs at least one trajectory");
  }
  const residuals = trajectories.map((tr) => {
    const trace = column(tr, "traceAtilde");
    return (trace[trace.length - 1] as number) - (trace[0] as number);
  });
  const { edges, counts } = histogram(residuals, Math.min(20, Math.max(5, residuals.length)));
  const checkLine = Object.entries(summary)
    .map(([name, c]) => `${name}: ${c.status}`)
    .sort()
    .join("  |  ");
  return {
    svg: renderHistogram({
      title: `Conserved-trace residuals (end - start)${checkLine ? " — " + checkLine : ""}`,
      xLabel: "trace drift per trajectory",
      binEdges: edges,
      counts,
    }),
    data: { residuals, bin_edges: edges, counts },
  };
}

/**
 * Measured coupling gap against its predicted accumulation.  With coupled
 * runs available this is E|a-b|^2 against the running cross-term integral;
 * without them it falls back to the mass-process variance against its
 * quadratic-variation budget, which obeys the same identity-vs-bound shape.
 */
export function couplingIdentity(coupled: Table[] | null, massProcess: Table): Figure {
  if (coupled !== null && coupled.length > 0) {
    const first = coupled[0] as Table;
    const t = column(first, "t");
    const nRuns = coupled.length;
    const mean = (name: string) =>
      t.map((_, i) =>
        coupled.reduce((acc, tbl) => acc + (column(tbl, name)[i] as number), 0) / nRuns,
      );
    const gap = mean("gap_sq");
    const predicted = mean("d_hs_sq");
    return {
      svg: renderLineFigure({
        title: "Coupling gap: measured vs predicted accumulation",
        xLabel: "t",
        yLabel: "mean squared gap",
        series: [
          { name: "E |a - b|^2", x: t, y: gap, color: "#1f77b4" },
          { name: "integrated defect", x: t, y: predicted, color: "#d62728", dash: "5 3" },
        ],
      }),
      data: { t, measured: gap, predicted },
    };
  }
  return varianceEnvelope(massProcess);
}

export function buildFigure(
  kind: FigureKind,
  inputs: {
    trajectories: Table[];
    massProcess: Table;
    summary: Summary;
    coupled: Table[] | null;
  },
): Figure {
  switch (kind) {
    case "spectrum-decay":
      return spectrumDecay(inputs.trajectories);
    case "variance-envelope":
      return varianceEnvelope(inputs.massProcess);
    case "martingale-residuals":
      return martingaleResiduals(inputs.trajectories, inputs.summary);
    case "coupling-identity":
      return couplingIdentity(inputs.coupled, inputs.massProcess);
  }
}
