"""Decision-support sweep: fit one policy per trade-off weight, attach
posterior-predictive cost pairs, prediction bands, and the recommended
immediate action, then filter to the non-dominated frontier."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bayes import PosteriorParams
from .core import RegionState
from .cost import CostModel, TradeoffWeight
from .rollout import RolloutConfig, ValueEstimate, rollout_traces


@dataclass(frozen=True)
class BandSet:
    """Pointwise (lower, mean, upper) envelopes per day for cumulative
    epidemiological cost, cumulative action cost, and mean action level."""

    days: tuple[int, ...]
    coverage: float
    epi: tuple[tuple[float, ...], tuple[float, ...], tuple[float, ...]]
    econ: tuple[tuple[float, ...], tuple[float, ...], tuple[float, ...]]
    action: tuple[tuple[float, ...], tuple[float, ...], tuple[float, ...]]

    def __post_init__(self):
        for lo, mean, hi in (self.epi, self.econ, self.action):
            if not all(a <= b + 1e-9 and b <= c + 1e-9
                       for a, b, c in zip(lo, mean, hi)):
                raise ValueError("band envelopes must satisfy lo <= mean <= hi")


def bands_from_traces(traces: dict, days: Sequence[int],
                      coverage: float) -> BandSet:
    """Empirical pointwise quantile envelopes at (1 +/- coverage) / 2."""
    q_lo = (1.0 - coverage) / 2.0
    q_hi = 1.0 - q_lo

    def envelope(matrix: np.ndarray):
        lo = np.quantile(matrix, q_lo, axis=1)
        hi = np.quantile(matrix, q_hi, axis=1)
        mean = matrix.mean(axis=1)
        return (tuple(map(float, lo)), tuple(map(float, mean)),
                tuple(map(float, hi)))

    return BandSet(days=tuple(days), coverage=coverage,
                   epi=envelope(traces["epi"]),
                   econ=envelope(traces["econ"]),
                   action=envelope(traces["action"]))


@dataclass(frozen=True)
class ParetoEntry:
    weight: TradeoffWeight
    policy: object
    expected_costs: tuple[float, float]
    cost_ses: tuple[float, float]
    immediate_action: int
    bands: BandSet
    planner_estimate: ValueEstimate


Planner = Callable[[TradeoffWeight, np.random.Generator],
                   tuple[object, ValueEstimate]]


class PlannerError(RuntimeError):
    def __init__(self, weight: TradeoffWeight, cause: Exception):
        self.weight = weight
        super().__init__(f"planner failed for weight {weight.omega}: {cause}")


def build_frontier(current: RegionState, posterior: PosteriorParams,
                   weights: Sequence[TradeoffWeight], planner: Planner,
                   cost_model: CostModel, cfg: RolloutConfig,
                   band_replications: int, rng: np.random.Generator, *,
                   coverage: float = 0.99) -> list[ParetoEntry]:
    """One entry per weight, sorted by weight; bands and expected cost pairs
    come from band_replications posterior-predictive rollouts under the
    fitted policy."""
    if not weights:
        raise ValueError("weights must be non-empty")
    if band_replications < 1:
        raise ValueError("band_replications must be >= 1")
    entries = []
    for weight in sorted(weights, key=lambda w: w.omega):
        try:
            policy, estimate = planner(weight, rng)
        except Exception as exc:  # noqa: BLE001 - reported with the weight
            raise PlannerError(weight, exc) from exc
        band_cfg = RolloutConfig(
            replications=band_replications, horizon=cfg.horizon,
            schedule=cfg.schedule, start=cfg.start,
            initial_action=cfg.initial_action,
            sample_theta_per_rollout=cfg.sample_theta_per_rollout,
            delay=cfg.delay)
        traces = rollout_traces(policy, current, posterior, cost_model,
                                band_cfg, rng)
        days = list(range(cfg.start, cfg.horizon + 1))
        bands = bands_from_traces(traces, days, coverage)
        final_epi = traces["epi"][-1]
        final_econ = traces["econ"][-1]
        k = band_replications
        ses = (float(final_epi.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0,
               float(final_econ.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0)
        immediate = int(policy.action(current, cfg.start)) \
            if hasattr(policy, "action") else int(policy(current))
        entries.append(ParetoEntry(
            weight=weight, policy=policy,
            expected_costs=(float(final_epi.mean()), float(final_econ.mean())),
            cost_ses=ses, immediate_action=immediate, bands=bands,
            planner_estimate=estimate))
    return entries


def pareto_filter(entries: Sequence[ParetoEntry], *,
                  ci_multiplier: float = 0.0) -> list[ParetoEntry]:
    """Entries whose cost pair is not strictly dominated on both axes.

    ci_multiplier > 0 gives the conservative variant: dominance must hold
    by more than ci_multiplier times the pooled standard errors.
    """
    kept = []
    for i, entry in enumerate(entries):
        epi_i, econ_i = entry.expected_costs
        dominated = False
        for j, other in enumerate(entries):
            if i == j:
                continue
            epi_j, econ_j = other.expected_costs
            epi_gap = ci_multiplier * (entry.cost_ses[0] + other.cost_ses[0])
            econ_gap = ci_multiplier * (entry.cost_ses[1] + other.cost_ses[1])
            if epi_j < epi_i - epi_gap and econ_j < econ_i - econ_gap:
                dominated = True
                break
        if not dominated:
            kept.append(entry)
    return kept


def recommend(entries: Sequence[ParetoEntry],
              chosen_weight: TradeoffWeight) -> tuple[int, ParetoEntry]:
    """The immediate action (plus full entry) for one weight of the sweep."""
    for entry in entries:
        if abs(entry.weight.omega - chosen_weight.omega) <= 1e-12:
            return entry.immediate_action, entry
    raise KeyError(f"no frontier entry for weight {chosen_weight.omega}")


def entry_to_dict(entry: ParetoEntry) -> dict:
    policy = entry.policy
    if hasattr(policy, "thresholds"):
        policy_repr = {"kind": "threshold",
                       "thresholds": list(policy.thresholds),
                       "tolerance_cap": policy.tolerance_cap}
    else:
        policy_repr = {"kind": type(policy).__name__}
    return {
        "weight": entry.weight.omega,
        "policy": policy_repr,
        "expected_costs": {"epi": entry.expected_costs[0],
                           "econ": entry.expected_costs[1]},
        "cost_ses": {"epi": entry.cost_ses[0], "econ": entry.cost_ses[1]},
        "immediate_action": entry.immediate_action,
        "bands": {
            "days": list(entry.bands.days),
            "coverage": entry.bands.coverage,
            "epi": {"lower": list(entry.bands.epi[0]),
                    "mean": list(entry.bands.epi[1]),
                    "upper": list(entry.bands.epi[2])},
            "econ": {"lower": list(entry.bands.econ[0]),
                     "mean": list(entry.bands.econ[1]),
                     "upper": list(entry.bands.econ[2])},
            "action": {"lower": list(entry.bands.action[0]),
                       "mean": list(entry.bands.action[1]),
                       "upper": list(entry.bands.action[2])},
        },
    }


def frontier_to_csv(entries: Sequence[ParetoEntry]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["weight", "epi_mean", "econ_mean", "action"])
    for entry in entries:
        writer.writerow([entry.weight.omega, entry.expected_costs[0],
                         entry.expected_costs[1], entry.immediate_action])
    return buf.getvalue()
