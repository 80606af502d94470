#!/usr/bin/env node
/**
 * Batch renderer: reads experiment CSVs and the summary JSON, writes one
 * SVG per figure kind (plus a JSON data sidecar where the figure carries
 * reference numbers) into the output directory.
 *
 * Usage:
 *   sloc-figures --trajectories DIR --mass-process FILE --summary FILE \
 *                --out DIR [--coupled DIR]
 */

import * as fs from "fs";
import * as path from "path";

import { parseSlocCsv, Table } from "./csv";
import { buildFigure, FIGURE_KINDS, Summary } from "./figures";

interface Args {
  trajectories: string;
  massProcess: string;
  summary: string;
  out: string;
  coupled: string | null;
}

export function parseArgs(argv: string[]): Args {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (key === undefined || !key.startsWith("--") || value === undefined) {
      throw new Error(`malformed arguments near ${JSON.stringify(key ?? "")}`);
    }
    flags.set(key.slice(2), value);
  }
  const required = (name: string): string => {
    const v = flags.get(name);
    if (v === undefined) throw new Error(`missing required flag --${name}`);
    return v;
  };
  return {
    trajectories: required("trajectories"),
    massProcess: required("mass-process"),
    summary: required("summary"),
    out: required("out"),
    coupled: flags.get("coupled") ?? null,
  };
}

function readCsvDir(dir: string): Table[] {
  const names = fs
    .readdirSync(dir)
    .filter((f) => f.endsWith(".csv"))
    .sort();
  if (names.length === 0) {
    throw new Error(`no CSV files in ${dir}`);
  }
  return names.map((f) =>
    parseSlocCsv(fs.readFileSync(path.join(dir, f), "utf8"), f),
  );
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    return 2;
  }
  try {
    const trajectories = readCsvDir(args.trajectories);
    const massProcess = parseSlocCsv(
      fs.readFileSync(args.massProcess, "utf8"),
      args.massProcess,
    );
    const summary = JSON.parse(fs.readFileSync(args.summary, "utf8")) as Summary;
    const coupled = args.coupled === null ? null : readCsvDir(args.coupled);

    fs.mkdirSync(args.out, { recursive: true });
    for (const kind of FIGURE_KINDS) {
      const fig = buildFigure(kind, { trajectories, massProcess, summary, coupled });
      fs.writeFileSync(path.join(args.out, `${kind}.svg`), fig.svg);
      if (fig.data !== undefined) {
        fs.writeFileSync(
          path.join(args.out, `${kind}.json`),
          JSON.stringify(fig.data, null, 2) + "\n",
        );
      }
    }
    return 0;
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
