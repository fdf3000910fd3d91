/** Aggregation of per-seed training curves into mean/std bands. */

export function mean(xs: number[]): number {
  if (xs.length === 0) throw new Error("mean of empty sample");
  return xs.reduce((a, b) => a + b, 0) / xs.length;
}

/** Sample standard deviation (n-1 denominator), 0 for a single value. */
export function sampleStd(xs: number[]): number {
  if (xs.length < 2) return 0;
  const m = mean(xs);
  const ss = xs.reduce((a, b) => a + (b - m) * (b - m), 0);
  return Math.sqrt(ss / (xs.length - 1));
}

export interface RunName {
  mode: "vpinn" | "pinn";
  reg: "on" | "off";
  seed: number;
}

const RUN_NAME = /^ns_(vpinn|pinn)_(regon|regoff)_seed(\d+)\.csv$/;

/** Decode the study's file naming; null for files that are not run logs. */
export function parseRunName(file: string): RunName | null {
  const m = RUN_NAME.exec(file);
  if (!m) return null;
  return {
    mode: m[1] as "vpinn" | "pinn",
    reg: m[2] === "regon" ? "on" : "off",
    seed: Number(m[3]),
  };
}

export interface Curve {
  steps: number[];
  values: number[];
}

export interface CurveBand {
  steps: number[];
  mean: number[];
  lower: number[];
  upper: number[];
  n: number;
}

/** Pointwise mean +- std across runs sharing one logging grid. */
export function aggregateCurves(runs: Curve[]): CurveBand {
  if (runs.length === 0) throw new Error("no runs to aggregate");
  const steps = runs[0]!.steps;
  for (const run of runs) {
    if (
      run.steps.length !== steps.length ||
      run.steps.some((s, i) => s !== steps[i])
    ) {
      throw new Error("runs disagree on logged steps; cannot aggregate");
    }
    if (run.values.length !== run.steps.length) {
      throw new Error("curve has mismatched steps/values lengths");
    }
  }
  const m: number[] = [];
  const lower: number[] = [];
  const upper: number[] = [];
  for (let i = 0; i < steps.length; i++) {
    const column = runs.map((r) => r.values[i]!);
    const mu = mean(column);
    const sd = sampleStd(column);
    m.push(mu);
    lower.push(mu - sd);
    upper.push(mu + sd);
  }
  return { steps, mean: m, lower, upper, n: runs.length };
}
