/** SVG chart construction from view-models (no chart library, no DOM state).
 *
 * Renderers return SVG strings built from the exact payload arrays; the
 * polyline/polygon coordinates are affine images of the served numbers.
 */

import type { BandChart, FrontierPoint } from "./model.js";
import { extent, linearScale } from "./model.js";

const W = 460;
const H = 260;
const PAD = { left: 64, right: 16, top: 24, bottom: 34 };

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;");
}

function axis(
  xTicks: { pos: number; label: string }[],
  yTicks: { pos: number; label: string }[],
): string {
  const parts: string[] = [];
  parts.push(
    `<line class="axis" x1="${PAD.left}" y1="${H - PAD.bottom}" ` +
      `x2="${W - PAD.right}" y2="${H - PAD.bottom}"/>`,
    `<line class="axis" x1="${PAD.left}" y1="${PAD.top}" ` +
      `x2="${PAD.left}" y2="${H - PAD.bottom}"/>`,
  );
  for (const t of xTicks) {
    parts.push(
      `<text class="tick" x="${t.pos.toFixed(1)}" y="${H - PAD.bottom + 16}" ` +
        `text-anchor="middle">${esc(t.label)}</text>`,
    );
  }
  for (const t of yTicks) {
    parts.push(
      `<text class="tick" x="${PAD.left - 6}" y="${t.pos.toFixed(1)}" ` +
        `text-anchor="end" dominant-baseline="middle">${esc(t.label)}</text>`,
    );
  }
  return parts.join("");
}

function ticksFor(domain: [number, number], count = 4): number[] {
  const [lo, hi] = domain;
  return Array.from(
    { length: count + 1 },
    (_, k) => lo + ((hi - lo) * k) / count,
  );
}

function fmt(value: number): string {
  if (Math.abs(value) >= 10000) return value.toExponential(1);
  if (Number.isInteger(value)) return String(value);
  return value.toFixed(Math.abs(value) < 10 ? 2 : 1);
}

export function markerSvg(
  shape: "circle" | "square" | "triangle",
  cx: number,
  cy: number,
  r: number,
  cls: string,
): string {
  const x = cx.toFixed(1);
  const y = cy.toFixed(1);
  if (shape === "circle") {
    return `<circle class="${cls}" cx="${x}" cy="${y}" r="${r}"/>`;
  }
  if (shape === "square") {
    return (
      `<rect class="${cls}" x="${(cx - r).toFixed(1)}" ` +
      `y="${(cy - r).toFixed(1)}" width="${2 * r}" height="${2 * r}"/>`
    );
  }
  const pts = [
    `${x},${(cy - r).toFixed(1)}`,
    `${(cx - r).toFixed(1)},${(cy + r).toFixed(1)}`,
    `${(cx + r).toFixed(1)},${(cy + r).toFixed(1)}`,
  ].join(" ");
  return `<polygon class="${cls}" points="${pts}"/>`;
}

/** Frontier scatter; markers carry data-index for click handling. */
export function frontierSvg(
  points: FrontierPoint[],
  selected: number | null,
): string {
  const xDomain = extent(points.map((p) => p.econ));
  const yDomain = extent(points.map((p) => p.epi));
  const x = linearScale(xDomain, [PAD.left, W - PAD.right]);
  const y = linearScale(yDomain, [H - PAD.bottom, PAD.top]);
  const body = points
    .map((p) => {
      const cls =
        `marker action-${p.action}` + (p.index === selected ? " selected" : "");
      const marker = markerSvg(p.shape, x(p.econ), y(p.epi), 7, cls);
      return (
        `<g class="frontier-point" tabindex="0" role="button" ` +
        `data-index="${p.index}" aria-label="${esc(p.label)}, ` +
        `action ${p.action}">${marker}</g>`
      );
    })
    .join("");
  const ax = axis(
    ticksFor(xDomain).map((v) => ({ pos: x(v), label: fmt(v) })),
    ticksFor(yDomain).map((v) => ({ pos: y(v), label: fmt(v) })),
  );
  return (
    `<svg viewBox="0 0 ${W} ${H}" class="chart frontier-chart" ` +
    `aria-label="Pareto frontier">` +
    `<text class="axis-label" x="${(PAD.left + W - PAD.right) / 2}" ` +
    `y="${H - 4}" text-anchor="middle">economic cost (currency)</text>` +
    `<text class="axis-label" x="12" y="${H / 2}" text-anchor="middle" ` +
    `transform="rotate(-90 12 ${H / 2})">epidemiological cost (cases)</text>` +
    ax +
    body +
    `</svg>`
  );
}

/** Envelope + mean-line coordinate lists for one band chart. */
export function bandPaths(chart: BandChart): {
  envelope: string;
  meanLine: string;
  x: (v: number) => number;
  y: (v: number) => number;
} {
  const xDomain = extent(chart.days);
  const yDomain = extent([...chart.lower, ...chart.upper]);
  const x = linearScale(xDomain, [PAD.left, W - PAD.right]);
  const y = linearScale(yDomain, [H - PAD.bottom, PAD.top]);
  const up = chart.days.map(
    (d, k) => `${x(d).toFixed(2)},${y(chart.upper[k]).toFixed(2)}`,
  );
  const down = chart.days
    .map((d, k) => `${x(d).toFixed(2)},${y(chart.lower[k]).toFixed(2)}`)
    .reverse();
  const meanLine = chart.days
    .map((d, k) => `${x(d).toFixed(2)},${y(chart.mean[k]).toFixed(2)}`)
    .join(" ");
  return { envelope: [...up, ...down].join(" "), meanLine, x, y };
}

export function bandSvg(chart: BandChart): string {
  const { envelope, meanLine, x, y } = bandPaths(chart);
  const xDomain = extent(chart.days);
  const yDomain = extent([...chart.lower, ...chart.upper]);
  const ax = axis(
    ticksFor(xDomain).map((v) => ({ pos: x(v), label: fmt(Math.round(v)) })),
    ticksFor(yDomain).map((v) => ({ pos: y(v), label: fmt(v) })),
  );
  return (
    `<svg viewBox="0 0 ${W} ${H}" class="chart band-chart" ` +
    `aria-label="${esc(chart.title)}">` +
    `<text class="chart-title" x="${PAD.left}" y="14">` +
    `${esc(chart.title)}</text>` +
    ax +
    `<polygon class="band-envelope" points="${envelope}"/>` +
    `<polyline class="band-mean" fill="none" points="${meanLine}"/>` +
    `<text class="axis-label" x="${(PAD.left + W - PAD.right) / 2}" ` +
    `y="${H - 4}" text-anchor="middle">day</text>` +
    `</svg>`
  );
}
