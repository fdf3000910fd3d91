/** Test-loss curves with mean +- std bands, regularized vs not. */

import {
  bandPath,
  DEFAULT_FRAME,
  axes,
  el,
  Frame,
  linearScale,
  linearTicks,
  log10Scale,
  logTicks,
  plotArea,
  polylinePoints,
  svgDocument,
  textEl,
} from "./svg.js";
import { aggregateCurves, Curve, CurveBand } from "./stats.js";

export interface NamedCurve extends Curve {
  file: string;
  reg: "on" | "off";
}

const COLORS: Record<"on" | "off", string> = {
  on: "#c0392b",
  off: "#2c6fbb",
};

export function renderLossCurves(
  curves: NamedCurve[],
  title: string,
  frame: Frame = DEFAULT_FRAME,
): string {
  if (curves.length === 0) throw new Error("no curves to plot");
  const groups: Partial<Record<"on" | "off", NamedCurve[]>> = {};
  for (const c of curves) (groups[c.reg] ??= []).push(c);

  const bands: Array<{ reg: "on" | "off"; band: CurveBand }> = [];
  for (const reg of ["on", "off"] as const) {
    const members = groups[reg];
    if (members) bands.push({ reg, band: aggregateCurves(members) });
  }

  const allSteps = bands.flatMap((b) => b.band.steps);
  const allValues = bands.flatMap((b) => [...b.band.mean, ...b.band.upper, ...b.band.lower]);
  const positive = allValues.filter((v) => v > 0);
  if (positive.length === 0) throw new Error("no positive losses: log axis impossible");
  const yMin = Math.min(...positive);
  const yMax = Math.max(...positive);

  const area = plotArea(frame);
  const xScale = linearScale([Math.min(...allSteps), Math.max(...allSteps)], area.x);
  const yScale = log10Scale([yMin, yMax], area.y);
  // a band edge at or below zero has no place on a log axis; pin it to the
  // bottom of the visible range instead of dropping the band
  const clampY = (v: number) => yScale(Math.max(v, yMin));

  const children: string[] = axes(
    frame, xScale, yScale,
    linearTicks(Math.min(...allSteps), Math.max(...allSteps)),
    logTicks(yMin, yMax),
    "training step", "held-out test loss",
  );

  bands.forEach(({ reg, band }) => {
    const xs = band.steps.map(xScale);
    children.push(el("path", {
      d: bandPath(xs, band.upper.map(clampY), band.lower.map(clampY)),
      fill: COLORS[reg], "fill-opacity": 0.15, stroke: "none",
      class: `band band-reg-${reg}`,
    }));
    children.push(el("polyline", {
      points: polylinePoints(xs, band.mean.map(clampY)),
      fill: "none", stroke: COLORS[reg], "stroke-width": 2,
      class: `mean mean-reg-${reg}`,
    }));
  });

  children.push(textEl(title, {
    x: frame.width / 2, y: 24, "text-anchor": "middle",
    "font-size": 15, "font-weight": "bold",
  }));
  bands.forEach(({ reg, band }, i) => {
    const y = frame.margin.top + 16 + 18 * i;
    const x = area.x[1] - 150;
    children.push(el("line", {
      x1: x, y1: y - 4, x2: x + 24, y2: y - 4,
      stroke: COLORS[reg], "stroke-width": 2,
    }));
    children.push(textEl(`regularizer ${reg} (n=${band.n})`, {
      x: x + 30, y, "font-size": 12,
    }));
  });
  return svgDocument(frame, children);
}
