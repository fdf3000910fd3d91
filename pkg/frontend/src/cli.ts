/** koopinn-plots: render SVG reports from the toolkit's CSV outputs.
 *
 *   koopinn-plots plot-loss-curves --in DIR --out FILE [--mode vpinn|pinn]
 *   koopinn-plots plot-scatter     --in DIR --out FILE
 *
 * plot-loss-curves reads every ns_<mode>_<regon|regoff>_seed<k>.csv in the
 * input directory and draws the held-out test-loss column as mean +- std
 * bands, regularized vs not.  plot-scatter reads pma_scatter.csv and
 * pma_correlations.csv and draws the sweep with its published correlations.
 */

import { mkdirSync, readdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { numericColumn, parseCsv, requireColumns } from "./csv.js";
import { NamedCurve, renderLossCurves } from "./lossCurves.js";
import { renderScatter } from "./scatter.js";
import { parseRunName } from "./stats.js";

interface Options {
  in?: string;
  out?: string;
  mode: "vpinn" | "pinn";
}

function parseFlags(argv: string[]): Options {
  const opts: Options = { mode: "vpinn" };
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (value === undefined) throw new Error(`flag ${flag} needs a value`);
    if (flag === "--in") opts.in = value;
    else if (flag === "--out") opts.out = value;
    else if (flag === "--mode") {
      if (value !== "vpinn" && value !== "pinn") {
        throw new Error(`--mode must be vpinn or pinn, got '${value}'`);
      }
      opts.mode = value;
    } else throw new Error(`unknown flag '${flag}'`);
  }
  if (!opts.in) throw new Error("--in DIR is required");
  if (!opts.out) throw new Error("--out FILE is required");
  return opts;
}

function writeSvg(path: string, svg: string): void {
  mkdirSync(dirname(path) || ".", { recursive: true });
  writeFileSync(path, svg);
}

export function plotLossCurves(opts: Options): void {
  const dir = opts.in!;
  const curves: NamedCurve[] = [];
  for (const file of readdirSync(dir).sort()) {
    const name = parseRunName(file);
    if (!name || name.mode !== opts.mode) continue;
    const table = parseCsv(readFileSync(join(dir, file), "utf8"), file);
    requireColumns(table, ["step", "loss_test"], file);
    curves.push({
      file,
      reg: name.reg,
      steps: numericColumn(table, "step", file),
      values: numericColumn(table, "loss_test", file),
    });
  }
  if (curves.length === 0) {
    throw new Error(`no ns_${opts.mode}_*.csv run logs found in ${dir}`);
  }
  const svg = renderLossCurves(curves, `${opts.mode}: held-out test loss`);
  writeSvg(opts.out!, svg);
}

export function plotScatter(opts: Options): void {
  const dir = opts.in!;
  const scatterPath = join(dir, "pma_scatter.csv");
  const corrPath = join(dir, "pma_correlations.csv");
  const scatter = parseCsv(readFileSync(scatterPath, "utf8"), "pma_scatter.csv");
  requireColumns(scatter, ["factor_sum", "test_error"], "pma_scatter.csv");
  const corr = parseCsv(readFileSync(corrPath, "utf8"), "pma_correlations.csv");
  requireColumns(corr, ["r", "pearson"], "pma_correlations.csv");
  const xs = numericColumn(scatter, "factor_sum", "pma_scatter.csv");
  const ys = numericColumn(scatter, "test_error", "pma_scatter.csv");
  const points = xs.map((x, i) => ({ factorSum: x, testError: ys[i]! }));
  const rows = corr.rows.map((r) => ({ r: r["r"]!, pearson: r["pearson"]! }));
  const svg = renderScatter(points, rows, "sweep: factor sum vs test error");
  writeSvg(opts.out!, svg);
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    if (command === "plot-loss-curves") plotLossCurves(parseFlags(rest));
    else if (command === "plot-scatter") plotScatter(parseFlags(rest));
    else {
      throw new Error(
        `usage: koopinn-plots <plot-loss-curves|plot-scatter> --in DIR --out FILE`,
      );
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 2;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exitCode = main(process.argv.slice(2));
}
