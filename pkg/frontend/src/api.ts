/** Typed client for the decision-service REST API.
 *
 * Every route the dashboard touches goes through this module; components
 * never build URLs by hand. All calls take an AbortSignal so navigation can
 * cancel in-flight requests.
 */

export interface RegionSummary {
  region_id: string;
  population: number;
  gdp_annual: number;
  series_length: number;
  latest_count: number;
  committed_action: number | null;
}

export interface SessionSummary {
  session_id: string;
  current_day: number;
  horizon: number;
  decision_interval: number;
  delay_d: number;
  is_decision_point: boolean;
  regions: RegionSummary[];
  weights: number[];
  posterior: unknown;
  num_levels: number;
}

export interface Envelope {
  lower: number[];
  mean: number[];
  upper: number[];
}

export interface BandSetDto {
  days: number[];
  coverage: number;
  epi: Envelope;
  econ: Envelope;
  action: Envelope;
}

export interface PolicyDto {
  kind: string;
  thresholds?: number[];
  tolerance_cap?: number;
}

export interface FrontierEntryDto {
  weight: number;
  policy: PolicyDto;
  expected_costs: { epi: number; econ: number };
  cost_ses: { epi: number; econ: number };
  immediate_action: number;
  bands: BandSetDto;
}

export interface FrontierDto {
  day: number;
  region_id: string;
  entries: FrontierEntryDto[];
}

export interface BandsDto {
  day: number;
  region_id: string;
  entry_index: number;
  weight: number;
  policy: PolicyDto;
  immediate_action: number;
  bands: BandSetDto;
}

export interface PendingDto {
  status: "pending";
  progress: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: unknown;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export interface CreateSessionRequest {
  config: Record<string, unknown>;
  dataset: {
    regions: { region_id: string; population: number; gdp_annual: number }[];
    series: {
      region_id: string;
      day: number;
      cumulative_confirmed: number;
      action_level: number;
    }[];
  };
}

/** 1s polling with multiplicative backoff, capped (design: 1s + backoff). */
export function backoffDelays(attempt: number): number {
  const delay = 1000 * Math.pow(1.5, Math.max(0, attempt));
  return Math.min(delay, 5000);
}

export function routes(base = "") {
  const session = (id: string) => `${base}/sessions/${encodeURIComponent(id)}`;
  const region = (id: string, rid: string) =>
    `${session(id)}/regions/${encodeURIComponent(rid)}`;
  return {
    health: () => `${base}/healthz`,
    sessions: () => `${base}/sessions`,
    session,
    frontier: (id: string, rid: string) => `${region(id, rid)}/frontier`,
    bands: (id: string, rid: string, entry: number) =>
      `${region(id, rid)}/policies/${entry}/bands`,
    action: (id: string, rid: string) => `${region(id, rid)}/action`,
    advance: (id: string) => `${session(id)}/advance`,
  };
}

async function parseJson(resp: Response): Promise<unknown> {
  const text = await resp.text();
  return text ? JSON.parse(text) : null;
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok || resp.status === 202 || resp.status === 304) return;
  let body: ApiErrorBody;
  try {
    body = (await parseJson(resp)) as ApiErrorBody;
  } catch {
    body = { code: "http_error", message: resp.statusText, detail: null };
  }
  throw new ApiError(resp.status, body);
}

export class ApiClient {
  private r;

  constructor(
    base = "",
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {
    this.r = routes(base);
  }

  private async get(url: string, signal?: AbortSignal): Promise<Response> {
    const resp = await this.fetchFn(url, { signal });
    await raiseForStatus(resp);
    return resp;
  }

  private async post(
    url: string,
    body: unknown,
    signal?: AbortSignal,
  ): Promise<Response> {
    const resp = await this.fetchFn(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    await raiseForStatus(resp);
    return resp;
  }

  async createSession(
    req: CreateSessionRequest,
    signal?: AbortSignal,
  ): Promise<SessionSummary> {
    const resp = await this.post(this.r.sessions(), req, signal);
    return (await parseJson(resp)) as SessionSummary;
  }

  async getSession(id: string, signal?: AbortSignal): Promise<SessionSummary> {
    const resp = await this.get(this.r.session(id), signal);
    return (await parseJson(resp)) as SessionSummary;
  }

  async getFrontierOnce(
    id: string,
    rid: string,
    signal?: AbortSignal,
  ): Promise<FrontierDto | PendingDto> {
    const resp = await this.get(this.r.frontier(id, rid), signal);
    const body = await parseJson(resp);
    if (resp.status === 202) return body as PendingDto;
    return body as FrontierDto;
  }

  /** Poll the frontier until planning finishes (202 -> 200 with backoff). */
  async pollFrontier(
    id: string,
    rid: string,
    signal?: AbortSignal,
    onProgress?: (fraction: number) => void,
    sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((res) => setTimeout(res, ms)),
  ): Promise<FrontierDto> {
    for (let attempt = 0; ; attempt++) {
      const result = await this.getFrontierOnce(id, rid, signal);
      if (!("status" in result)) return result;
      onProgress?.(result.progress);
      if (signal?.aborted) throw new DOMException("aborted", "AbortError");
      await sleep(backoffDelays(attempt));
    }
  }

  async getBands(
    id: string,
    rid: string,
    entry: number,
    signal?: AbortSignal,
  ): Promise<BandsDto> {
    const resp = await this.get(this.r.bands(id, rid, entry), signal);
    return (await parseJson(resp)) as BandsDto;
  }

  async commitAction(
    id: string,
    rid: string,
    action: number,
    signal?: AbortSignal,
  ): Promise<{ region_id: string; action: number; day: number }> {
    const resp = await this.post(this.r.action(id, rid), { action }, signal);
    return (await parseJson(resp)) as {
      region_id: string;
      action: number;
      day: number;
    };
  }

  async advance(
    id: string,
    mode: "simulate" | "ingest",
    observations?: Record<string, number[]>,
    signal?: AbortSignal,
  ): Promise<{ current_day: number }> {
    const body =
      mode === "ingest" ? { mode, observations } : { mode };
    const resp = await this.post(this.r.advance(id), body, signal);
    return (await parseJson(resp)) as { current_day: number };
  }
}
