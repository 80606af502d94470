import { describe, expect, it } from "vitest";

import {
  CSV_VERSION_LINE,
  CsvFormatError,
  column,
  columnsMatching,
  parseSlocCsv,
} from "../src/csv";

const GOOD = [CSV_VERSION_LINE, "t,a_1,a_2", "0,1.5,2", "0.5,-3,1e-2"].join("\n");

describe("parseSlocCsv", () => {
  it("parses a well-formed file", () => {
    const table = parseSlocCsv(GOOD);
    expect(table.columns).toEqual(["t", "a_1", "a_2"]);
    expect(table.rows).toEqual([
      [0, 1.5, 2],
      [0.5, -3, 0.01],
    ]);
  });

  it("tolerates a trailing newline", () => {
    expect(parseSlocCsv(GOOD + "\n").rows).toHaveLength(2);
  });

  it("rejects a missing or wrong version line", () => {
    expect(() => parseSlocCsv("t,a\n0,1")).toThrow(CsvFormatError);
    expect(() => parseSlocCsv("# sloc-csv v2\nt\n0")).toThrow(/version line/);
    expect(() => parseSlocCsv("")).toThrow(CsvFormatError);
  });

  it("rejects ragged rows with the row number", () => {
    const bad = [CSV_VERSION_LINE, "t,a", "0,1", "0.5"].join("\n");
    expect(() => parseSlocCsv(bad)).toThrow(/row 4/);
  });

  it("rejects non-numeric cells rather than producing NaN", () => {
    const bad = [CSV_VERSION_LINE, "t,a", "0,oops"].join("\n");
    expect(() => parseSlocCsv(bad)).toThrow(/non-numeric/);
  });

  it("reads python float repr including infinities", () => {
    const text = [CSV_VERSION_LINE, "v", "inf", "-inf", "1e300"].join("\n");
    const vals = column(parseSlocCsv(text), "v");
    expect(vals).toEqual([Infinity, -Infinity, 1e300]);
  });

  it("prefixes errors with the source name when given", () => {
    expect(() => parseSlocCsv("nope", "run_003.csv")).toThrow(/run_003\.csv/);
  });
});

describe("column helpers", () => {
  it("extracts a named column", () => {
    expect(column(parseSlocCsv(GOOD), "a_2")).toEqual([2, 0.01]);
  });

  it("errors on a missing column and lists what exists", () => {
    expect(() => column(parseSlocCsv(GOOD), "zzz")).toThrow(/t, a_1, a_2/);
  });

  it("gathers columns by prefix preserving order", () => {
    expect(columnsMatching(parseSlocCsv(GOOD), "a_")).toEqual([
      [1.5, 2],
      [-3, 0.01],
    ]);
    expect(() => columnsMatching(parseSlocCsv(GOOD), "eig_")).toThrow(CsvFormatError);
  });
});
