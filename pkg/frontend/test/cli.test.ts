import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { CSV_VERSION_LINE } from "../src/csv";
import { main, parseArgs } from "../src/cli";

let tmp: string;

beforeEach(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "sloc-figures-"));
});

afterEach(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

function writeTrajectory(dir: string, name: string): void {
  const header = "t,V,a_1,A_11,eig_1,N_eff,traceAtilde";
  const rows: string[] = [];
  for (let k = 0; k <= 5; k++) {
    const t = k * 0.2;
    rows.push([t, 1, 0, Math.exp(-t), Math.exp(-t), 50, 1].join(","));
  }
  fs.writeFileSync(
    path.join(dir, name),
    [CSV_VERSION_LINE, header, ...rows].join("\n") + "\n",
  );
}

function writeInputs(): { trajDir: string; mass: string; summary: string; out: string } {
  const trajDir = path.join(tmp, "traj");
  fs.mkdirSync(trajDir);
  writeTrajectory(trajDir, "trajectory_000.csv");
  writeTrajectory(trajDir, "trajectory_001.csv");
  const mass = path.join(tmp, "mass.csv");
  fs.writeFileSync(
    mass,
    [
      CSV_VERSION_LINE,
      "t,mean_g,var_g,qv_rate,band_frequency",
      "0,0.5,0,0.1,1",
      "0.5,0.5,0.04,0.1,1",
      "1,0.5,0.08,0.1,1",
    ].join("\n") + "\n",
  );
  const summary = path.join(tmp, "summary.json");
  fs.writeFileSync(
    summary,
    JSON.stringify({ "mass-martingale": { value: 0, ci: null, status: "pass" } }),
  );
  return { trajDir, mass, summary, out: path.join(tmp, "figs") };
}

function argvFor(i: ReturnType<typeof writeInputs>): string[] {
  return [
    "--trajectories",
    i.trajDir,
    "--mass-process",
    i.mass,
    "--summary",
    i.summary,
    "--out",
    i.out,
  ];
}

describe("parseArgs", () => {
  it("requires every mandatory flag", () => {
    expect(() => parseArgs(["--out", "x"])).toThrow(/--trajectories/);
    expect(() => parseArgs(["--trajectories"])).toThrow(/malformed/);
  });

  it("treats --coupled as optional", () => {
    const args = parseArgs([
      ...argvFor(writeInputs()),
      "--coupled",
      "somewhere",
    ]);
    expect(args.coupled).toBe("somewhere");
  });
});

describe("main", () => {
  it("writes the four figures and the spectrum data sidecar", () => {
    const inputs = writeInputs();
    expect(main(argvFor(inputs))).toBe(0);
    for (const kind of [
      "spectrum-decay",
      "variance-envelope",
      "martingale-residuals",
      "coupling-identity",
    ]) {
      const svg = fs.readFileSync(path.join(inputs.out, `${kind}.svg`), "utf8");
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg.length).toBeGreaterThan(200);
    }
    const data = JSON.parse(
      fs.readFileSync(path.join(inputs.out, "spectrum-decay.json"), "utf8"),
    ) as { t: number[]; reference: number[] };
    data.t.forEach((t, i) => {
      expect(Math.abs((data.reference[i] as number) - Math.exp(-t))).toBeLessThanOrEqual(
        1e-15,
      );
    });
  });

  it("is byte-deterministic across invocations", () => {
    const inputs = writeInputs();
    main(argvFor(inputs));
    const first = fs.readFileSync(path.join(inputs.out, "spectrum-decay.svg"), "utf8");
    main(argvFor(inputs));
    const second = fs.readFileSync(path.join(inputs.out, "spectrum-decay.svg"), "utf8");
    expect(second).toBe(first);
  });

  it("fails with exit 1 on a malformed CSV, naming the file", () => {
    const inputs = writeInputs();
    fs.writeFileSync(path.join(inputs.trajDir, "trajectory_000.csv"), "t,a\n0,1\n");
    const stderr: string[] = [];
    const orig = process.stderr.write.bind(process.stderr);
    process.stderr.write = ((chunk: string) => {
      stderr.push(String(chunk));
      return true;
    }) as typeof process.stderr.write;
    try {
      expect(main(argvFor(inputs))).toBe(1);
    } finally {
      process.stderr.write = orig;
    }
    expect(stderr.join("")).toContain("trajectory_000.csv");
  });

  it("fails with exit 2 on missing flags", () => {
    const orig = process.stderr.write.bind(process.stderr);
    process.stderr.write = (() => true) as typeof process.stderr.write;
    try {
      expect(main([])).toBe(2);
    } finally {
      process.stderr.write = orig;
    }
  });
});
