import { describe, expect, it } from "vitest";

import { CSV_VERSION_LINE, parseSlocCsv, Table } from "../src/csv";
import {
  buildFigure,
  couplingIdentity,
  martingaleResiduals,
  spectrumDecay,
  varianceEnvelope,
  Summary,
} from "../src/figures";
import { renderLineFigure } from "../src/svg";

/** Synthetic 2-d trajectory with eigenvalues decaying like e^{-t}. */
function trajectoryTable(scale: number): Table {
  const header = "t,V,a_1,a_2,A_11,A_12,A_22,eig_1,eig_2,N_eff,traceAtilde";
  const rows: string[] = [];
  for (let k = 0; k <= 10; k++) {
    const t = k * 0.1;
    const e1 = scale * Math.exp(-t);
    const e2 = 0.5 * scale * Math.exp(-t);
    rows.push(
      [t, 1, 0.1 * t, -0.1 * t, e1, 0, e2, e2, e1, 100, 2 + 0.001 * scale * t].join(","),
    );
  }
  return parseSlocCsv([CSV_VERSION_LINE, header, ...rows].join("\n"));
}

function massTable(): Table {
  const header = "t,mean_g,var_g,qv_rate,band_frequency";
  const rows: string[] = [];
  for (let k = 0; k <= 10; k++) {
    const t = k * 0.1;
    rows.push([t, 0.5, 0.08 * t, 0.1, 1].join(","));
  }
  return parseSlocCsv([CSV_VERSION_LINE, header, ...rows].join("\n"));
}

function coupledTable(offset: number): Table {
  const header = "t,S,gap_sq,d_hs_sq,trA,trC";
  const rows: string[] = [];
  for (let k = 0; k <= 10; k++) {
    const t = k * 0.1;
    rows.push([t, 1.06, (0.2 + offset) * t, 0.2 * t, 2, 2].join(","));
  }
  return parseSlocCsv([CSV_VERSION_LINE, header, ...rows].join("\n"));
}

const SUMMARY: Summary = {
  "mass-martingale": { value: 0.001, ci: [-0.01, 0.01], status: "pass" },
};

describe("spectrumDecay", () => {
  it("tracks the largest eigenvalue and emits an exact e^{-t} reference", () => {
    const fig = spectrumDecay([trajectoryTable(1), trajectoryTable(0.9)]);
    const data = fig.data as { t: number[]; reference: number[] };
    expect(data.t).toHaveLength(11);
    data.t.forEach((t, i) => {
      expect(Math.abs((data.reference[i] as number) - Math.exp(-t))).toBeLessThanOrEqual(
        1e-15,
      );
    });
    expect(fig.svg).toContain("<svg");
    expect(fig.svg).toContain("exp(-t) reference");
  });

  it("refuses an empty trajectory set", () => {
    expect(() => spectrumDecay([])).toThrow(/at least one/);
  });

  it("refuses tables without eigenvalue columns", () => {
    expect(() => spectrumDecay([massTable()])).toThrow(/eigenvalue/);
  });
});

describe("varianceEnvelope", () => {
  it("plots variance against the qv budget line", () => {
    const fig = varianceEnvelope(massTable());
    const data = fig.data as { budget: number[] };
    expect(data.budget[10]).toBeCloseTo(0.1, 12);
    expect(fig.svg).toContain("qv rate * t");
  });
});

describe("martingaleResiduals", () => {
  it("histograms end-minus-start trace drift and shows check verdicts", () => {
    const trajs = [trajectoryTable(1), trajectoryTable(2), trajectoryTable(3)];
    const fig = martingaleResiduals(trajs, SUMMARY);
    const data = fig.data as { residuals: number[]; counts: number[] };
    expect(data.residuals).toHaveLength(3);
    expect(data.residuals[0]).toBeCloseTo(0.001, 12);
    expect(data.counts.reduce((a, b) => a + b, 0)).toBe(3);
    expect(fig.svg).toContain("mass-martingale: pass");
  });
});

describe("couplingIdentity", () => {
  it("averages gap and defect curves over coupled runs", () => {
    const fig = couplingIdentity([coupledTable(0), coupledTable(0.02)], massTable());
    const data = fig.data as { measured: number[]; predicted: number[] };
    expect(data.measured[10]).toBeCloseTo(0.21, 12);
    expect(data.predicted[10]).toBeCloseTo(0.2, 12);
  });

  it("falls back to the mass-process budget without coupled runs", () => {
    const fig = couplingIdentity(null, massTable());
    expect(fig.svg).toContain("quadratic-variation budget");
  });
});

describe("rendering determinism", () => {
  it("identical inputs give byte-identical SVG", () => {
    const inputs = {
      trajectories: [trajectoryTable(1), trajectoryTable(2)],
      massProcess: massTable(),
      summary: SUMMARY,
      coupled: [coupledTable(0)],
    };
    const a = buildFigure("spectrum-decay", inputs).svg;
    const b = buildFigure("spectrum-decay", inputs).svg;
    expect(a).toBe(b);
  });

  it("never emits timestamps or locale-dependent numbers", () => {
    const svg = renderLineFigure({
      title: "x",
      xLabel: "t",
      yLabel: "y",
      series: [{ name: "s", x: [0, 1e-7, 2e-7], y: [1234567.891, -0.000012345, 0] }],
    });
    expect(svg).not.toMatch(/\d{4}-\d{2}-\d{2}/);
    const points = /points="([^"]*)"/.exec(svg);
    expect(points).not.toBeNull();
    for (const pair of (points![1] as string).split(" ")) {
      expect(pair).toMatch(/^-?\d+(\.\d+)?,-?\d+(\.\d+)?$/);
    }
  });
});
