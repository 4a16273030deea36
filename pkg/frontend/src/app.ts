/** Single-page dashboard: hash-routed wizard and session pages.
 *
 * All server data flows through the typed ApiClient; every navigation
 * aborts the previous page's in-flight requests.
 */

import {
  ApiClient,
  ApiError,
  type FrontierDto,
  type SessionSummary,
} from "./api.js";
import { bandSvg, frontierSvg } from "./charts.js";
import {
  DEMO_CONFIG,
  DEMO_REGIONS,
  buildCreateRequest,
  type WizardConfig,
} from "./demo.js";
import {
  appendHistory,
  bandCharts,
  formatWeight,
  frontierPoints,
  validateObservations,
  validateWizardRegion,
  type HistoryEntry,
  type WizardRegion,
} from "./model.js";

const api = new ApiClient("");
const root = () => document.getElementById("app")!;

let pageAbort: AbortController | null = null;

function navigate(hash: string): void {
  window.location.hash = hash;
}

function freshSignal(): AbortSignal {
  pageAbort?.abort();
  pageAbort = new AbortController();
  return pageAbort.signal;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function errorText(err: unknown): string {
  if (err instanceof ApiError) {
    const detail =
      typeof err.body.detail === "string" ? ` — ${err.body.detail}` : "";
    return `${err.body.code}: ${err.body.message}${detail}`;
  }
  return err instanceof Error ? err.message : String(err);
}

// ---------------------------------------------------------------- wizard --

function renderWizard(): void {
  freshSignal();
  const config: WizardConfig = { ...DEMO_CONFIG };
  const regions: WizardRegion[] = DEMO_REGIONS.map((r) => ({ ...r }));
  const error = el("p", { class: "error", role: "alert" });

  const configInputs = (
    Object.keys(config) as (keyof WizardConfig)[]
  ).map((key) => {
    const input = el("input", {
      type: "number",
      id: `cfg-${key}`,
      value: String(config[key]),
    });
    input.addEventListener("change", () => {
      config[key] = Number(input.value);
    });
    return el(
      "label",
      { for: `cfg-${key}` },
      key.replace(/_/g, " "),
      input,
    );
  });

  const regionRows = el("div", { class: "region-rows" });
  const renderRegions = () => {
    regionRows.replaceChildren(
      ...regions.map((region, idx) => {
        const id = el("input", { value: region.region_id });
        const pop = el("input", {
          type: "number",
          value: String(region.population),
        });
        const gdp = el("input", {
          type: "number",
          value: String(region.gdp_annual),
        });
        id.addEventListener("change", () => (region.region_id = id.value));
        pop.addEventListener(
          "change",
          () => (region.population = Number(pop.value)),
        );
        gdp.addEventListener(
          "change",
          () => (region.gdp_annual = Number(gdp.value)),
        );
        const remove = el("button", { type: "button" }, "remove");
        remove.addEventListener("click", () => {
          regions.splice(idx, 1);
          renderRegions();
        });
        return el("div", { class: "region-row" }, id, pop, gdp, remove);
      }),
    );
  };
  renderRegions();

  const addRegion = el("button", { type: "button" }, "add region");
  addRegion.addEventListener("click", () => {
    regions.push({
      region_id: `region-${regions.length + 1}`,
      population: 10000,
      gdp_annual: 5.0e7,
    });
    renderRegions();
  });

  const submit = el("button", { type: "submit" }, "create demo session");
  const form = el(
    "form",
    {},
    el("h2", {}, "New planning session"),
    el("fieldset", {}, el("legend", {}, "Schedule"), ...configInputs),
    el(
      "fieldset",
      {},
      el("legend", {}, "Regions (id, population, annual GDP)"),
      regionRows,
      addRegion,
    ),
    error,
    submit,
  );
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    error.textContent = "";
    for (const region of regions) {
      const problem = validateWizardRegion(region);
      if (problem) {
        error.textContent = problem;
        return;
      }
    }
    submit.setAttribute("disabled", "true");
    try {
      const session = await api.createSession(
        buildCreateRequest(config, regions),
      );
      navigate(`#/session/${session.session_id}`);
    } catch (err) {
      error.textContent = errorText(err);
    } finally {
      submit.removeAttribute("disabled");
    }
  });

  root().replaceChildren(
    el("h1", {}, "Intervention planning dashboard"),
    el(
      "p",
      {},
      "Create a session from the demo preset, explore the trade-off " +
        "frontier per region, commit an action, and advance the week.",
    ),
    form,
  );
}

// --------------------------------------------------------------- session --

interface SessionPageState {
  sessionId: string;
  summary: SessionSummary | null;
  regionId: string | null;
  frontier: FrontierDto | null;
  progress: number;
  selectedEntry: number | null;
  history: HistoryEntry[];
  busy: boolean;
  error: string;
  mode: "simulate" | "ingest";
  observations: Record<string, string>;
}

const historyBySession = new Map<string, HistoryEntry[]>();

async function renderSession(sessionId: string): Promise<void> {
  const signal = freshSignal();
  const state: SessionPageState = {
    sessionId,
    summary: null,
    regionId: null,
    frontier: null,
    progress: 0,
    selectedEntry: null,
    history: historyBySession.get(sessionId) ?? [],
    busy: false,
    error: "",
    mode: "simulate",
    observations: {},
  };

  const refresh = async () => {
    state.summary = await api.getSession(sessionId, signal);
    if (
      state.regionId === null ||
      !state.summary.regions.some((r) => r.region_id === state.regionId)
    ) {
      state.regionId = state.summary.regions[0]?.region_id ?? null;
    }
    state.frontier = null;
    state.selectedEntry = null;
    state.progress = 0;
    draw();
    await loadFrontier();
  };

  const loadFrontier = async () => {
    if (!state.summary?.is_decision_point || state.regionId === null) return;
    try {
      state.frontier = await api.pollFrontier(
        sessionId,
        state.regionId,
        signal,
        (fraction) => {
          state.progress = fraction;
          drawFrontierPanel();
        },
      );
      state.selectedEntry = 0;
      draw();
    } catch (err) {
      if ((err as Error).name === "AbortError") return;
      state.error = errorText(err);
      draw();
    }
  };

  const frontierPanel = el("section", { class: "frontier-panel" });
  const bandsPanel = el("section", { class: "bands-panel" });
  const controlPanel = el("section", { class: "control-panel" });
  const historyPanel = el("aside", { class: "history-panel" });
  const errorBox = el("p", { class: "error", role: "alert" });

  const drawFrontierPanel = () => {
    if (!state.summary) return;
    if (!state.summary.is_decision_point) {
      frontierPanel.replaceChildren(
        el("p", {}, `Day ${state.summary.current_day} is not a decision day.`),
      );
      return;
    }
    if (!state.frontier) {
      const pct = Math.round(state.progress * 100);
      frontierPanel.replaceChildren(
        el("h3", {}, `Frontier — ${state.regionId}`),
        el("p", { class: "progress" }, `planning… ${pct}%`),
        el("progress", { max: "1", value: String(state.progress) }),
      );
      return;
    }
    const points = frontierPoints(state.frontier.entries);
    const holder = el("div", { class: "chart-holder" });
    holder.innerHTML = frontierSvg(points, state.selectedEntry);
    holder.querySelectorAll<SVGGElement>(".frontier-point").forEach((g) => {
      const pick = () => {
        state.selectedEntry = Number(g.dataset.index);
        draw();
      };
      g.addEventListener("click", pick);
      g.addEventListener("keydown", (event) => {
        if (event.key === "Enter" || event.key === " ") {
          event.preventDefault();
          pick();
        }
      });
    });
    const legend = el(
      "p",
      { class: "legend" },
      "marker shape = recommended action: ● keep open, ■ mitigate, " +
        "▲ suppress",
    );
    frontierPanel.replaceChildren(
      el("h3", {}, `Frontier — ${state.regionId} (day ${state.frontier.day})`),
      holder,
      legend,
    );
  };

  const drawBandsPanel = () => {
    bandsPanel.replaceChildren();
    if (!state.frontier || state.selectedEntry === null) return;
    const entry = state.frontier.entries[state.selectedEntry];
    if (!entry) return;
    const header = el(
      "h3",
      {},
      `Policy ω=${formatWeight(entry.weight)} — recommends action ` +
        `${entry.immediate_action} (${Math.round(
          entry.bands.coverage * 100,
        )}% bands)`,
    );
    const charts = bandCharts(entry.bands).map((chart) => {
      const holder = el("div", { class: "chart-holder" });
      holder.innerHTML = bandSvg(chart);
      return holder;
    });
    bandsPanel.replaceChildren(header, ...charts);
  };

  const drawControls = () => {
    controlPanel.replaceChildren();
    const summary = state.summary;
    if (!summary || !summary.is_decision_point) return;
    const region = summary.regions.find(
      (r) => r.region_id === state.regionId,
    );
    if (!region) return;

    if (region.committed_action === null) {
      const entry =
        state.frontier && state.selectedEntry !== null
          ? state.frontier.entries[state.selectedEntry]
          : null;
      const options = Array.from({ length: summary.num_levels }, (_, k) =>
        el(
          "option",
          {
            value: String(k + 1),
            ...(entry && entry.immediate_action === k + 1
              ? { selected: "selected" }
              : {}),
          },
          `level ${k + 1}`,
        ),
      );
      const select = el("select", { id: "action-select" }, ...options);
      const commit = el(
        "button",
        { type: "button", ...(state.frontier ? {} : { disabled: "true" }) },
        `commit for ${region.region_id}`,
      );
      commit.addEventListener("click", async () => {
        if (state.busy) return; // idempotent guard: one POST per click burst
        state.busy = true;
        commit.setAttribute("disabled", "true");
        try {
          await api.commitAction(
            sessionId,
            region.region_id,
            Number(select.value),
            signal,
          );
          state.summary = await api.getSession(sessionId, signal);
          state.error = "";
        } catch (err) {
          state.error = errorText(err);
        } finally {
          state.busy = false;
          draw();
        }
      });
      controlPanel.append(
        el("label", { for: "action-select" }, "action: ", select),
        commit,
      );
    } else {
      controlPanel.append(
        el(
          "p",
          {},
          `${region.region_id} committed level ${region.committed_action}.`,
        ),
      );
    }

    const allCommitted = summary.regions.every(
      (r) => r.committed_action !== null,
    );
    if (!allCommitted) return;

    const modeSelect = el(
      "select",
      { id: "mode-select" },
      el("option", { value: "simulate", selected: "selected" }, "simulate"),
      el("option", { value: "ingest" }, "ingest observed counts"),
    );
    modeSelect.addEventListener("change", () => {
      state.mode = modeSelect.value as "simulate" | "ingest";
      draw();
    });
    const ingestInputs: HTMLTextAreaElement[] = [];
    const ingestBlock = el("div", { class: "ingest-block" });
    if (state.mode === "ingest") {
      for (const r of summary.regions) {
        const area = el("textarea", {
          "data-region": r.region_id,
          rows: "2",
          placeholder:
            `${summary.decision_interval} cumulative counts for ` +
            `${r.region_id} (latest ${r.latest_count})`,
        });
        area.value = state.observations[r.region_id] ?? "";
        area.addEventListener("change", () => {
          state.observations[r.region_id] = area.value;
        });
        ingestInputs.push(area);
        ingestBlock.append(
          el("label", {}, `${r.region_id}: `, area),
        );
      }
    }
    const advance = el("button", { type: "button" }, "advance one interval");
    advance.addEventListener("click", async () => {
      if (state.busy) return;
      state.busy = true;
      try {
        let observations: Record<string, number[]> | undefined;
        if (state.mode === "ingest") {
          observations = {};
          for (const area of ingestInputs) {
            const rid = area.dataset.region!;
            const r = summary.regions.find((x) => x.region_id === rid)!;
            const result = validateObservations(
              area.value,
              summary.decision_interval,
              r.latest_count,
            );
            if ("error" in result) {
              throw new Error(`${rid}: ${result.error}`);
            }
            observations[rid] = result.counts;
          }
        }
        state.history = appendHistory(
          state.history,
          summary.current_day,
          Object.fromEntries(
            summary.regions.map((r) => [r.region_id, r.committed_action!]),
          ),
        );
        historyBySession.set(sessionId, state.history);
        await api.advance(sessionId, state.mode, observations, signal);
        state.error = "";
        await refresh();
      } catch (err) {
        state.error = errorText(err);
        draw();
      } finally {
        state.busy = false;
      }
    });
    controlPanel.append(
      el("hr", {}),
      el("label", { for: "mode-select" }, "advance mode: ", modeSelect),
      ingestBlock,
      advance,
    );
  };

  const drawHistory = () => {
    historyPanel.replaceChildren(
      el("h3", {}, "Action history"),
      ...(state.history.length
        ? state.history.map((h) =>
            el(
              "p",
              { class: "history-entry" },
              `day ${h.day}: ` +
                Object.entries(h.actions)
                  .map(([rid, a]) => `${rid}→${a}`)
                  .join(", "),
            ),
          )
        : [el("p", {}, "no decisions yet")]),
    );
  };

  const draw = () => {
    const summary = state.summary;
    errorBox.textContent = state.error;
    if (!summary) return;
    const tabs = el(
      "nav",
      { class: "region-tabs", role: "tablist" },
      ...summary.regions.map((r) => {
        const tab = el(
          "button",
          {
            role: "tab",
            type: "button",
            class: r.region_id === state.regionId ? "tab active" : "tab",
            "aria-selected": String(r.region_id === state.regionId),
          },
          `${r.region_id} (${r.latest_count} confirmed)`,
        );
        tab.addEventListener("click", async () => {
          if (state.regionId === r.region_id) return;
          state.regionId = r.region_id;
          state.frontier = null;
          state.selectedEntry = null;
          draw();
          await loadFrontier();
        });
        return tab;
      }),
    );
    drawFrontierPanel();
    drawBandsPanel();
    drawControls();
    drawHistory();
    root().replaceChildren(
      el(
        "header",
        {},
        el("h1", {}, `Session ${sessionId.slice(0, 8)}…`),
        el(
          "p",
          {},
          `day ${summary.current_day} of ${summary.horizon}, ` +
            `decisions every ${summary.decision_interval} days, ` +
            `confirmation delay ${summary.delay_d} days`,
        ),
        el("a", { href: "#/" }, "new session"),
      ),
      errorBox,
      tabs,
      el(
        "main",
        { class: "session-grid" },
        frontierPanel,
        bandsPanel,
        controlPanel,
        historyPanel,
      ),
    );
  };

  try {
    await refresh();
  } catch (err) {
    if ((err as Error).name === "AbortError") return;
    if (err instanceof ApiError && err.status === 404) {
      root().replaceChildren(
        el(
          "div",
          { class: "banner", role: "alert" },
          el("p", {}, "This session no longer exists on the server."),
          el("a", { href: "#/" }, "return to start"),
        ),
      );
      return;
    }
    root().replaceChildren(el("p", { class: "error" }, errorText(err)));
  }
}

// ---------------------------------------------------------------- router --

function route(): void {
  const hash = window.location.hash || "#/";
  const match = hash.match(/^#\/session\/([A-Za-z0-9-]+)$/);
  if (match) {
    void renderSession(match[1]);
  } else {
    renderWizard();
  }
}

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", route);
