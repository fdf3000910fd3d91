import { readFileSync } from "node:fs";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { numericColumn, parseCsv } from "../src/csv.js";
import { renderScatter } from "../src/scatter.js";

const FIXTURES = fileURLToPath(new URL("./fixtures", import.meta.url));

describe("renderScatter", () => {
  it("draws one circle per sweep point", () => {
    const t = parseCsv(
      readFileSync(join(FIXTURES, "pma_scatter.csv"), "utf8"),
      "pma_scatter.csv",
    );
    const xs = numericColumn(t, "factor_sum");
    const ys = numericColumn(t, "test_error");
    const pts = xs.map((x, i) => ({ factorSum: x, testError: ys[i]! }));
    const svg = renderScatter(pts, [], "sweep");
    expect((svg.match(/class="point"/g) ?? []).length).toBe(pts.length);
  });

  it("renders published correlations verbatim, never recomputing", () => {
    // a deliberately wrong value must survive to the output untouched
    const pts = [
      { factorSum: 1, testError: 1 },
      { factorSum: 2, testError: 4 },
    ];
    const svg = renderScatter(pts, [{ r: "3", pearson: "0.123456789" }], "t");
    expect(svg).toContain("pearson r=3: 0.123456789");
  });

  it("rejects empty input and non-positive errors", () => {
    expect(() => renderScatter([], [], "t")).toThrow(/no scatter points/);
    expect(() =>
      renderScatter([{ factorSum: 1, testError: 0 }], [], "t"),
    ).toThrow(/log axis/);
  });
});
