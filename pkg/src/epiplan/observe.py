"""Latent state construction from surveillance counts.

Confirmed individuals are isolated, so the cumulative confirmed count plays
the role of the removed compartment. Infections confirm after an expected
lag of D days, so the infectious count at day t is proxied by the cases
newly confirmed during (t, t+D]; states are therefore only reconstructable
up to D days before the end of the series. The decision-time state is
synthesized by rolling the estimated model over that unobservable window
(model-based simulation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DataError, GsirParams, RegionMeta, RegionState, SurveillanceSeries
from .gsir import gsir_step


@dataclass(frozen=True)
class DelaySpec:
    """Expected infectious-to-confirmation lag in days."""

    delay_days: int

    def __post_init__(self):
        if self.delay_days < 0:
            raise DataError(
                f"delay_days must be >= 0, got {self.delay_days}")


def reconstruct_states(series: SurveillanceSeries, meta: RegionMeta,
                       delay: DelaySpec) -> list[RegionState]:
    """Compartment states for days 1 .. len(series) - D.

    R_t is the cumulative confirmed count, I_t the cases confirmed during
    the following D days, and S_t the remainder of the population.
    """
    d = delay.delay_days
    counts = series.cumulative_confirmed
    states = []
    for t in range(len(counts) - d):
        removed = counts[t]
        infectious = counts[t + d] - counts[t]
        susceptible = meta.population - infectious - removed
        if susceptible < 0:
            raise DataError(
                f"reconstructed susceptible count negative on day {t + 1} "
                f"for region {series.region_id} "
                f"(confirmed {counts[t + d]} exceeds population "
                f"{meta.population})")
        states.append(RegionState(
            susceptible=susceptible, infectious=infectious,
            removed=removed, population=meta.population))
    return states


def mbs_proxy(last_full_state: RegionState, recent_actions: Sequence[int],
              params: GsirParams, replications: int,
              rng: np.random.Generator) -> RegionState:
    """Decision-time proxy state: roll the model over the D unobservable
    days under the recorded actions, average compartments over replications,
    round S and R half-up, and rebalance through I."""
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications}")
    if not recent_actions:
        return last_full_state
    s_sum = 0.0
    r_sum = 0.0
    for _ in range(replications):
        state = last_full_state
        for action in recent_actions:
            state, _, _ = gsir_step(state, action, params, rng)
        s_sum += state.susceptible
        r_sum += state.removed
    m = last_full_state.population
    s_mean = int(np.floor(s_sum / replications + 0.5))
    r_mean = int(np.floor(r_sum / replications + 0.5))
    s_mean = min(s_mean, m)
    r_mean = min(r_mean, m - s_mean)
    return RegionState(susceptible=s_mean, infectious=m - s_mean - r_mean,
                       removed=r_mean, population=m)
