"""Stochastic transition models: intervention-aware SIR, the SEIR robustness
variant, forward simulation, and reproduction-number summaries.

One day advances as
    e_S ~ Poisson(beta[action] * S * I / M)   (truncated at S)
    e_R ~ Binomial(I, gamma)
    S' = S - e_S;  R' = R + e_R;  I' = M - S' - R'
with both flows drawn from the pre-step state.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import DataError, GsirParams, RegionState


@dataclass(frozen=True)
class GseirParams:
    """SIR parameters plus the per-day exposed-to-infectious probability."""

    gsir: GsirParams
    incubation_rate: float

    def __post_init__(self):
        if not 0.0 <= self.incubation_rate <= 1.0:
            raise DataError(
                f"incubation_rate must be in [0,1], got {self.incubation_rate}")


@dataclass(frozen=True)
class SeirState:
    susceptible: int
    exposed: int
    infectious: int
    removed: int
    population: int

    def __post_init__(self):
        parts = (self.susceptible, self.exposed, self.infectious, self.removed)
        if min(parts) < 0 or self.population <= 0:
            raise DataError(f"invalid SEIR state {parts}, M={self.population}")
        if sum(parts) != self.population:
            raise DataError(
                f"SEIR compartments sum {sum(parts)} != population "
                f"{self.population}")


@dataclass(frozen=True)
class Trajectory:
    """One simulated path: daily states, actions, and both increments."""

    states: tuple[RegionState, ...]
    actions: tuple[int, ...]
    new_infections: tuple[int, ...]
    new_removals: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.states)


def gsir_rate(state: RegionState, action: int, params: GsirParams) -> float:
    """Expected daily new infections: beta[action] * S * I / M."""
    return (params.beta(action) * state.susceptible * state.infectious
            / state.population)


def gsir_step(state: RegionState, action: int, params: GsirParams,
              rng: np.random.Generator) -> tuple[RegionState, int, int]:
    """Advance one day; returns (next_state, new_infections, new_removals)."""
    rate = gsir_rate(state, action, params)
    e_s = int(rng.poisson(rate)) if rate > 0 else 0
    e_s = min(e_s, state.susceptible)
    e_r = int(rng.binomial(state.infectious, params.gamma)) \
        if state.infectious > 0 else 0
    s_next = state.susceptible - e_s
    r_next = state.removed + e_r
    i_next = state.population - s_next - r_next
    return (RegionState(susceptible=s_next, infectious=i_next,
                        removed=r_next, population=state.population),
            e_s, e_r)


def gseir_step(state: SeirState, action: int, params: GseirParams,
               rng: np.random.Generator) -> SeirState:
    """One SEIR day: S->E Poisson at the SIR rate, E->I Binomial(alpha),
    I->R Binomial(gamma)."""
    rate = (params.gsir.beta(action) * state.susceptible * state.infectious
            / state.population)
    e_se = min(int(rng.poisson(rate)) if rate > 0 else 0, state.susceptible)
    e_ei = int(rng.binomial(state.exposed, params.incubation_rate)) \
        if state.exposed > 0 else 0
    e_ir = int(rng.binomial(state.infectious, params.gsir.gamma)) \
        if state.infectious > 0 else 0
    return SeirState(
        susceptible=state.susceptible - e_se,
        exposed=state.exposed + e_se - e_ei,
        infectious=state.infectious + e_ei - e_ir,
        removed=state.removed + e_ir,
        population=state.population,
    )


Policy = Callable[[RegionState], int]


def simulate(initial: RegionState, policy: Policy, params: GsirParams,
             horizon: int, schedule: Sequence[int],
             rng: np.random.Generator, *, start: int = 1,
             initial_action: int = 1) -> Trajectory:
    """Roll the model from day `start` to `horizon` under the persistence rule:
    at days in `schedule` the policy is queried, otherwise the previous action
    holds. The trajectory records the state at each day start."""
    if horizon < start:
        raise ValueError(f"horizon {horizon} before start {start}")
    schedule_set = set(schedule)
    states = [initial]
    actions: list[int] = []
    new_inf: list[int] = []
    new_rem: list[int] = []
    action = initial_action
    state = initial
    for t in range(start, horizon + 1):
        if t in schedule_set:
            action = policy(state)
        state, e_s, e_r = gsir_step(state, action, params, rng)
        actions.append(action)
        new_inf.append(e_s)
        new_rem.append(e_r)
        states.append(state)
    return Trajectory(states=tuple(states), actions=tuple(actions),
                      new_infections=tuple(new_inf),
                      new_removals=tuple(new_rem))


def reproduction_numbers(posterior, samples: int, rng: np.random.Generator,
                         *, method: str = "ratio") -> list[tuple[float, float]]:
    """Posterior (mean, sd) of the basic reproduction number beta_j / gamma
    per action level.

    method="ratio" is the Monte Carlo mean of the sampled ratio (default);
    method="mean_ratio" is the deterministic ratio of posterior means.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if method == "mean_ratio":
        means = posterior.mean_params(project=False)
        return [(b / means.gamma, 0.0) for b in means.betas]
    if method != "ratio":
        raise ValueError(f"unknown method {method!r}")
    a_r, b_r = posterior.gamma_beta_params
    gammas = rng.beta(a_r, b_r, size=samples)
    out = []
    for a_s, b_s in posterior.beta_gamma_params:
        betas = rng.gamma(a_s, 1.0 / b_s, size=samples)
        ratios = betas / gammas
        out.append((float(ratios.mean()), float(ratios.std(ddof=1)) if samples > 1 else 0.0))
    return out


_TRAJECTORY_HEADER = ["day", "susceptible", "infectious", "removed",
                      "action", "new_infections", "new_removals"]


def trajectory_to_csv(trajectory: Trajectory, path: str | Path | None = None,
                      *, start: int = 1) -> str:
    """Serialize a trajectory; day rows carry the state at day start and the
    increments drawn during that day (the final state has no increment row)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_TRAJECTORY_HEADER)
    for k, state in enumerate(trajectory.states[:-1]):
        writer.writerow([start + k, state.susceptible, state.infectious,
                         state.removed, trajectory.actions[k],
                         trajectory.new_infections[k],
                         trajectory.new_removals[k]])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
