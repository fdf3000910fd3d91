/** Hand-rolled SVG output: element builder, scales, tick generation.
 *
 * Charts here are static report artifacts, so everything renders to a
 * plain string with no DOM or drawing library involved.
 */

export type Attrs = Record<string, string | number>;

export function el(tag: string, attrs: Attrs, children: string[] = []): string {
  const rendered = Object.entries(attrs)
    .map(([k, v]) => `${k}="${String(v)}"`)
    .join(" ");
  if (children.length === 0) return `<${tag} ${rendered}/>`;
  return `<${tag} ${rendered}>${children.join("")}</${tag}>`;
}

export function textEl(content: string, attrs: Attrs): string {
  return el("text", attrs, [escapeText(content)]);
}

export function escapeText(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export type Scale = (x: number) => number;

export function linearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  return (x) => r0 + ((x - d0) / span) * (r1 - r0);
}

export function log10Scale(
  domain: [number, number],
  range: [number, number],
): Scale {
  if (domain[0] <= 0 || domain[1] <= 0) {
    throw new Error("log scale needs a positive domain");
  }
  const inner = linearScale([Math.log10(domain[0]), Math.log10(domain[1])], range);
  return (x) => inner(Math.log10(x));
}

/** Decade ticks covering [min, max]. */
export function logTicks(min: number, max: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.floor(Math.log10(min)); e <= Math.ceil(Math.log10(max)); e++) {
    ticks.push(10 ** e);
  }
  return ticks;
}

export function linearTicks(min: number, max: number, count = 5): number[] {
  const span = max - min || 1;
  const rawStep = span / count;
  const mag = 10 ** Math.floor(Math.log10(rawStep));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= count) ?? mag * 10;
  const ticks: number[] = [];
  for (let t = Math.ceil(min / step) * step; t <= max + 1e-12 * span; t += step) {
    ticks.push(t);
  }
  return ticks;
}

export function formatTick(v: number): string {
  if (v === 0) return "0";
  const e = Math.log10(Math.abs(v));
  if (e >= 5 || e < -3) return v.toExponential(0).replace("+", "");
  return Number(v.toPrecision(3)).toString();
}

export function polylinePoints(xs: number[], ys: number[]): string {
  return xs.map((x, i) => `${round2(x)},${round2(ys[i]!)}`).join(" ");
}

/** Closed band path: upper edge forward, lower edge back. */
export function bandPath(
  xs: number[],
  upper: number[],
  lower: number[],
): string {
  const fwd = xs.map((x, i) => `${i === 0 ? "M" : "L"}${round2(x)} ${round2(upper[i]!)}`);
  const back = [...xs.keys()]
    .reverse()
    .map((i) => `L${round2(xs[i]!)} ${round2(lower[i]!)}`);
  return [...fwd, ...back, "Z"].join(" ");
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
}

export const DEFAULT_FRAME: Frame = {
  width: 720,
  height: 440,
  margin: { top: 44, right: 24, bottom: 52, left: 72 },
};

export function plotArea(frame: Frame): {
  x: [number, number];
  y: [number, number];
} {
  return {
    x: [frame.margin.left, frame.width - frame.margin.right],
    y: [frame.height - frame.margin.bottom, frame.margin.top],
  };
}

export function axes(
  frame: Frame,
  xScale: Scale,
  yScale: Scale,
  xTicks: number[],
  yTicks: number[],
  xLabel: string,
  yLabel: string,
): string[] {
  const area = plotArea(frame);
  const parts: string[] = [];
  const axisStyle = { stroke: "#333", "stroke-width": 1 };
  parts.push(el("line", { x1: area.x[0], y1: area.y[0], x2: area.x[1], y2: area.y[0], ...axisStyle }));
  parts.push(el("line", { x1: area.x[0], y1: area.y[0], x2: area.x[0], y2: area.y[1], ...axisStyle }));
  for (const t of xTicks) {
    const px = xScale(t);
    parts.push(el("line", { x1: px, y1: area.y[0], x2: px, y2: area.y[0] + 5, ...axisStyle }));
    parts.push(textEl(formatTick(t), {
      x: px, y: area.y[0] + 20, "text-anchor": "middle", "font-size": 12,
    }));
  }
  for (const t of yTicks) {
    const py = yScale(t);
    parts.push(el("line", { x1: area.x[0] - 5, y1: py, x2: area.x[0], y2: py, ...axisStyle }));
    parts.push(el("line", {
      x1: area.x[0], y1: py, x2: area.x[1], y2: py,
      stroke: "#ddd", "stroke-width": 0.5,
    }));
    parts.push(textEl(formatTick(t), {
      x: area.x[0] - 8, y: py + 4, "text-anchor": "end", "font-size": 12,
    }));
  }
  parts.push(textEl(xLabel, {
    x: (area.x[0] + area.x[1]) / 2, y: frame.height - 12,
    "text-anchor": "middle", "font-size": 13,
  }));
  parts.push(textEl(yLabel, {
    x: 16, y: (area.y[0] + area.y[1]) / 2, "text-anchor": "middle",
    "font-size": 13, transform: `rotate(-90 16 ${(area.y[0] + area.y[1]) / 2})`,
  }));
  return parts;
}

export function svgDocument(frame: Frame, children: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" height="${frame.height}" viewBox="0 0 ${frame.width} ${frame.height}">`,
    el("rect", { x: 0, y: 0, width: frame.width, height: frame.height, fill: "white" }),
    ...children,
    "</svg>",
  ].join("\n");
}
