/**
 * Reader for the experiment CSV format.
 *
 * Files start with the version line `# sloc-csv v1`, followed by a header
 * row and numeric data rows.  Parsing is strict: a wrong version line, a
 * ragged row or a non-numeric cell is an error, never a silent NaN.
 */

export const CSV_VERSION_LINE = "# sloc-csv v1";

export class CsvFormatError extends Error {
  constructor(message: string, readonly source?: string) {
    super(source ? `${source}: ${message}` : message);
    this.name = "CsvFormatError";
  }
}

export interface Table {
  columns: string[];
  rows: number[][];
}

export function parseSlocCsv(text: string, source?: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines[0] !== CSV_VERSION_LINE) {
    throw new CsvFormatError(
      `expected version line ${JSON.stringify(CSV_VERSION_LINE)}, got ${JSON.stringify(lines[0] ?? "")}`,
      source,
    );
  }
  const header = lines[1];
  if (!header) {
    throw new CsvFormatError("missing header row", source);
  }
  const columns = header.split(",");
  const rows: number[][] = [];
  for (let i = 2; i < lines.length; i++) {
    const cells = (lines[i] as string).split(",");
    if (cells.length !== columns.length) {
      throw new CsvFormatError(
        `row ${i + 1} has ${cells.length} cells, expected ${columns.length}`,
        source,
      );
    }
    const row = cells.map((c) => {
      const v = Number(c);
      if (!Number.isFinite(v) && c !== "inf" && c !== "-inf") {
        throw new CsvFormatError(`non-numeric cell ${JSON.stringify(c)} in row ${i + 1}`, source);
      }
      return c === "inf" ? Infinity : c === "-inf" ? -Infinity : v;
    });
    rows.push(row);
  }
  return { columns, rows };
}

export function column(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new CsvFormatError(`no column ${JSON.stringify(name)} (have: ${table.columns.join(", ")})`);
  }
  return table.rows.map((r) => r[idx] as number);
}

export function columnsMatching(table: Table, prefix: string): number[][] {
  const idxs = table.columns
    .map((c, i) => (c.startsWith(prefix) ? i : -1))
    .filter((i) => i >= 0);
  if (idxs.length === 0) {
    throw new CsvFormatError(`no columns with prefix ${JSON.stringify(prefix)}`);
  }
  return table.rows.map((r) => idxs.map((i) => r[i] as number));
}
