/** Demo preset: a small two-region session with default priors and a fast
 * planner configuration, matching the service's simulate mode. */

import type { CreateSessionRequest } from "./api.js";
import type { WizardRegion } from "./model.js";

export const DEMO_REGIONS: WizardRegion[] = [
  { region_id: "north", population: 10000, gdp_annual: 5.0e7 },
  { region_id: "south", population: 10000, gdp_annual: 5.0e7 },
];

export const DEMO_COUNTS = [0, 0, 2, 5, 9, 14, 20, 27, 35, 44, 54, 65];

export interface WizardConfig {
  horizon: number;
  decision_interval: number;
  delay_d: number;
  start_day: number;
  seed: number;
}

export const DEMO_CONFIG: WizardConfig = {
  horizon: 40,
  decision_interval: 7,
  delay_d: 4,
  start_day: 12,
  seed: 7,
};

/** Build the create-session payload from wizard state; the demo preset uses
 * a shared observed-count prefix for every region. */
export function buildCreateRequest(
  config: WizardConfig,
  regions: WizardRegion[],
  counts: number[] = DEMO_COUNTS,
): CreateSessionRequest {
  return {
    config: {
      ...config,
      weights: [0.1, 0.27, 0.74, 2.0, 5.5, 14.8, 40.3, 0.014],
      planner: {
        rollouts: 10,
        band_replications: 50,
        grid_rounds: [
          { windows: [[0, 100, 50], [0, 400, 200]] },
          { windows: [[50, 50, 25], [200, 200, 100]], relative: true },
        ],
      },
      tolerance_cap: 500,
      mbs_replications: 50,
    },
    dataset: {
      regions: regions.map((r) => ({ ...r })),
      series: regions.flatMap((r) =>
        counts.map((c, d) => ({
          region_id: r.region_id,
          day: d + 1,
          cumulative_confirmed: c,
          action_level: 1,
        })),
      ),
    },
  };
}
