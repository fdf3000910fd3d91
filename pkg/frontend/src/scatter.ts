/** Sweep scatter: regularizer factor sum vs final test error.
 *
 * Correlation values are rendered verbatim from the upstream CSV; this
 * module never recomputes statistics the toolkit already published.
 */

import {
  DEFAULT_FRAME,
  axes,
  el,
  Frame,
  linearScale,
  linearTicks,
  log10Scale,
  logTicks,
  plotArea,
  svgDocument,
  textEl,
} from "./svg.js";

export interface ScatterPoint {
  factorSum: number;
  testError: number;
}

export interface CorrelationRow {
  r: string;
  pearson: string;
}

export function renderScatter(
  points: ScatterPoint[],
  correlations: CorrelationRow[],
  title: string,
  frame: Frame = DEFAULT_FRAME,
): string {
  if (points.length === 0) throw new Error("no scatter points to plot");
  if (points.some((p) => p.testError <= 0)) {
    throw new Error("non-positive test error: log axis impossible");
  }
  const xs = points.map((p) => p.factorSum);
  const ys = points.map((p) => p.testError);
  const area = plotArea(frame);
  const xScale = linearScale([Math.min(...xs), Math.max(...xs)], area.x);
  const yScale = log10Scale([Math.min(...ys), Math.max(...ys)], area.y);

  const children: string[] = axes(
    frame, xScale, yScale,
    linearTicks(Math.min(...xs), Math.max(...xs)),
    logTicks(Math.min(...ys), Math.max(...ys)),
    "regularizer factor sum", "final test error",
  );
  for (const p of points) {
    children.push(el("circle", {
      cx: Math.round(xScale(p.factorSum) * 100) / 100,
      cy: Math.round(yScale(p.testError) * 100) / 100,
      r: 4, fill: "#1d1a16", "fill-opacity": 0.75, class: "point",
    }));
  }
  children.push(textEl(title, {
    x: frame.width / 2, y: 24, "text-anchor": "middle",
    "font-size": 15, "font-weight": "bold",
  }));
  correlations.forEach((row, i) => {
    children.push(textEl(`pearson r=${row.r}: ${row.pearson}`, {
      x: area.x[0] + 12, y: frame.margin.top + 16 + 18 * i,
      "font-size": 12, class: "correlation",
    }));
  });
  return svgDocument(frame, children);
}
