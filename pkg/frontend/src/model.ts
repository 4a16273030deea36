/** Pure view-model helpers.
 *
 * Everything the charts render is derived here from raw API payloads with
 * no smoothing, rescaling, or client-side recomputation of statistics, so
 * tests can diff rendered datasets against the payloads exactly.
 */

import type { BandSetDto, Envelope, FrontierEntryDto } from "./api.js";

/** Marker shapes keyed by recommended immediate action level. */
export const ACTION_SHAPES: Record<number, "circle" | "square" | "triangle"> =
  { 1: "circle", 2: "square", 3: "triangle" };

export function markerShape(action: number): "circle" | "square" | "triangle" {
  return ACTION_SHAPES[action] ?? "circle";
}

export interface FrontierPoint {
  index: number;
  weight: number;
  epi: number;
  econ: number;
  epiSe: number;
  econSe: number;
  action: number;
  shape: "circle" | "square" | "triangle";
  label: string;
}

/** Scatter points 1:1 with served frontier entries, in served order. */
export function frontierPoints(entries: FrontierEntryDto[]): FrontierPoint[] {
  return entries.map((entry, index) => ({
    index,
    weight: entry.weight,
    epi: entry.expected_costs.epi,
    econ: entry.expected_costs.econ,
    epiSe: entry.cost_ses.epi,
    econSe: entry.cost_ses.econ,
    action: entry.immediate_action,
    shape: markerShape(entry.immediate_action),
    label: `ω=${formatWeight(entry.weight)}`,
  }));
}

export function formatWeight(weight: number): string {
  if (weight >= 10) return weight.toFixed(1);
  if (weight >= 0.1) return weight.toFixed(2);
  return weight.toPrecision(2);
}

export interface BandChart {
  title: string;
  days: number[];
  lower: number[];
  mean: number[];
  upper: number[];
}

/** The three stacked band charts, arrays passed through untouched. */
export function bandCharts(bands: BandSetDto): BandChart[] {
  const chart = (title: string, env: Envelope): BandChart => ({
    title,
    days: bands.days,
    lower: env.lower,
    mean: env.mean,
    upper: env.upper,
  });
  return [
    chart("Cumulative epidemiological cost (cases)", bands.epi),
    chart("Cumulative action cost (currency)", bands.econ),
    chart("Mean action level", bands.action),
  ];
}

/** Ingest-form validation: counts must be monotone from the latest count. */
export function validateObservations(
  text: string,
  expectedLength: number,
  latestCount: number,
): { counts: number[] } | { error: string } {
  const parts = text
    .split(/[\s,]+/)
    .map((part) => part.trim())
    .filter((part) => part.length > 0);
  if (parts.length !== expectedLength) {
    return {
      error: `expected ${expectedLength} daily counts, got ${parts.length}`,
    };
  }
  const counts: number[] = [];
  let prev = latestCount;
  for (const part of parts) {
    const value = Number(part);
    if (!Number.isInteger(value) || value < 0) {
      return { error: `"${part}" is not a nonnegative integer` };
    }
    if (value < prev) {
      return {
        error: `cumulative counts must not decrease (${value} < ${prev})`,
      };
    }
    counts.push(value);
    prev = value;
  }
  return { counts };
}

export interface WizardRegion {
  region_id: string;
  population: number;
  gdp_annual: number;
}

export function validateWizardRegion(
  region: WizardRegion,
): string | null {
  if (!region.region_id.trim()) return "region id required";
  if (!(Number.isInteger(region.population) && region.population > 0)) {
    return `population must be a positive integer, got ${region.population}`;
  }
  if (!(region.gdp_annual >= 0)) {
    return `annual GDP must be nonnegative, got ${region.gdp_annual}`;
  }
  return null;
}

/** Chart scaling: data range -> pixel range, shared by tests and charts. */
export function linearScale(
  domain: [number, number],
  range: [number, number],
): (x: number) => number {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  return (x) => r0 + ((x - d0) / span) * (r1 - r0);
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  return lo === hi ? [lo - 0.5, hi + 0.5] : [lo, hi];
}

/** History rail entries: one per past decision day. */
export interface HistoryEntry {
  day: number;
  actions: Record<string, number>;
}

export function appendHistory(
  history: HistoryEntry[],
  day: number,
  actions: Record<string, number>,
): HistoryEntry[] {
  return [...history.filter((h) => h.day !== day), { day, actions }].sort(
    (a, b) => a.day - b.day,
  );
}
