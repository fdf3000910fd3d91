/** Minimal CSV reader for the toolkit's log and sweep files.
 *
 * The upstream writer never quotes fields (numbers via repr, names are
 * bare words), so a plain split is the whole grammar.  Every malformed
 * input gets a message naming the file and the offending row or column.
 */

export interface CsvTable {
  header: string[];
  rows: Record<string, string>[];
}

export function parseCsv(text: string, source = "csv"): CsvTable {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error(`${source}: empty file`);
  const header = lines[0]!.split(",");
  const rows: Record<string, string>[] = [];
  for (let i = 1; i < lines.length; i++) {
    const fields = lines[i]!.split(",");
    if (fields.length !== header.length) {
      throw new Error(
        `${source}: row ${i} has ${fields.length} fields, expected ${header.length}`,
      );
    }
    const row: Record<string, string> = {};
    header.forEach((name, j) => (row[name] = fields[j]!));
    rows.push(row);
  }
  return { header, rows };
}

export function requireColumns(
  table: CsvTable,
  columns: string[],
  source = "csv",
): void {
  for (const c of columns) {
    if (!table.header.includes(c)) {
      throw new Error(`${source}: missing column '${c}' (has: ${table.header.join(", ")})`);
    }
  }
}

export function toNumber(raw: string, column: string, source = "csv"): number {
  const v = Number(raw);
  if (!Number.isFinite(v)) {
    throw new Error(`${source}: column '${column}' has non-numeric value '${raw}'`);
  }
  return v;
}

export function numericColumn(
  table: CsvTable,
  column: string,
  source = "csv",
): number[] {
  return table.rows.map((r) => toNumber(r[column] ?? "", column, source));
}
