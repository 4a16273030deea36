"""Monte Carlo policy evaluation: the inner loop of the planning objective.

Each replication draws one parameter vector from the posterior, simulates
the epidemic from the start state to the horizon under the action
persistence rule, and accumulates new infections plus the weighted action
cost. Threshold-style policies evaluate on a vectorized fast path across
replications; arbitrary policies fall back to a scalar loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bayes import PosteriorParams
from .core import GsirParams, RegionState
from .cost import CostModel, TradeoffWeight, sample_action_cost
from .gsir import gsir_step
from .observe import DelaySpec


class StepCounter:
    """Counts simulated (replication, day) steps; used to verify the
    predicted evaluation budget."""

    def __init__(self):
        self.steps = 0

    def reset(self):
        self.steps = 0


step_counter = StepCounter()


@dataclass(frozen=True)
class RolloutConfig:
    replications: int
    horizon: int
    schedule: tuple[int, ...]
    start: int = 1
    initial_action: int = 1
    sample_theta_per_rollout: bool = True
    resample_theta_per_step: bool = False
    delay: DelaySpec | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError(
                f"replications must be >= 1, got {self.replications}")
        if self.horizon < self.start:
            raise ValueError(
                f"horizon {self.horizon} before start {self.start}")


@dataclass(frozen=True)
class ValueEstimate:
    weighted_mean: float
    epi_mean: float
    econ_mean: float
    standard_error: float
    replications: int

    def __post_init__(self):
        if self.standard_error < 0:
            raise ValueError("standard_error must be >= 0")


def _make_estimate(epi: np.ndarray, econ: np.ndarray,
                   omega: float) -> ValueEstimate:
    weighted = epi + omega * econ
    m = len(weighted)
    se = float(weighted.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    est = ValueEstimate(
        weighted_mean=float(weighted.mean()),
        epi_mean=float(epi.mean()),
        econ_mean=float(econ.mean()),
        standard_error=se,
        replications=m,
    )
    assert abs(est.weighted_mean - (est.epi_mean + omega * est.econ_mean)) \
        <= 1e-9 * max(1.0, abs(est.weighted_mean))
    return est


def _query(policy, state: RegionState, day: int) -> int:
    action = policy.action(state, day) if hasattr(policy, "action") \
        else policy(state)
    return int(action)


def _draw_thetas(posterior: PosteriorParams, m: int, sample: bool,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if sample:
        gammas, betas = posterior.sample(rng, size=m)
    else:
        mean = posterior.mean_params(project=False)
        gammas = np.full(m, mean.gamma)
        betas = np.tile(np.asarray(mean.betas), (m, 1))
    return np.asarray(gammas, dtype=float), np.asarray(betas, dtype=float)


def _batch_rollout(policy, start: RegionState, gammas: np.ndarray,
                   betas: np.ndarray, cost_model: CostModel,
                   cfg: RolloutConfig, rng: np.random.Generator,
                   *, resampler=None) -> tuple[np.ndarray, np.ndarray, dict]:
    """Vectorized rollouts across replications; returns per-replication
    cumulative (epi, econ) costs plus per-day traces for band building."""
    m = gammas.shape[0]
    pop = start.population
    s = np.full(m, start.susceptible, dtype=np.int64)
    i = np.full(m, start.infectious, dtype=np.int64)
    r = np.full(m, start.removed, dtype=np.int64)
    action = np.full(m, cfg.initial_action, dtype=np.int64)
    epi = np.zeros(m)
    econ = np.zeros(m)
    schedule = set(cfg.schedule)
    means = np.asarray(cost_model.level_means)
    sds = np.asarray(cost_model.level_sds)

    num_days = cfg.horizon - cfg.start + 1
    epi_trace = np.zeros((num_days, m))
    econ_trace = np.zeros((num_days, m))
    action_trace = np.zeros((num_days, m))

    for k, t in enumerate(range(cfg.start, cfg.horizon + 1)):
        if resampler is not None:
            gammas, betas = resampler()
        if t in schedule:
            action = np.asarray(
                policy.action_batch(i, t, susceptible=s, removed=r,
                                    population=pop, horizon=cfg.horizon),
                dtype=np.int64)
        beta = betas[np.arange(m), action - 1]
        rate = beta * s * i / pop
        e_s = np.minimum(rng.poisson(rate), s)
        e_r = rng.binomial(i, gammas)
        s = s - e_s
        r = r + e_r
        i = pop - s - r
        epi += e_s
        draws = rng.normal(means[action - 1], sds[action - 1])
        day_cost = np.maximum(draws, 0.0) * cost_model.gdp_daily
        econ += day_cost
        epi_trace[k] = epi
        econ_trace[k] = econ
        action_trace[k] = action
        step_counter.steps += m

    traces = {"epi": epi_trace, "econ": econ_trace, "action": action_trace}
    return epi, econ, traces


def _scalar_rollout(policy, start: RegionState, params: GsirParams,
                    cost_model: CostModel, cfg: RolloutConfig,
                    rng: np.random.Generator) -> tuple[float, float]:
    epi = 0.0
    econ = 0.0
    state = start
    action = cfg.initial_action
    schedule = set(cfg.schedule)
    for t in range(cfg.start, cfg.horizon + 1):
        if t in schedule:
            action = _query(policy, state, t)
        nxt, e_s, _ = gsir_step(state, action, params, rng)
        epi += e_s
        econ += sample_action_cost(cost_model, action, rng)
        state = nxt
        step_counter.steps += 1
    return epi, econ


def _supports_batch(policy) -> bool:
    return hasattr(policy, "action_batch")


def evaluate_policy(policy, start: RegionState, posterior: PosteriorParams,
                    weight: TradeoffWeight, cost_model: CostModel,
                    cfg: RolloutConfig, rng: np.random.Generator
                    ) -> ValueEstimate:
    """Expected weighted cost of a policy under posterior uncertainty.

    One parameter draw per replication (the default) integrates over the
    posterior; sample_theta_per_rollout=False fixes the posterior mean.
    """
    m = cfg.replications
    gammas, betas = _draw_thetas(posterior, m,
                                 cfg.sample_theta_per_rollout, rng)
    if _supports_batch(policy):
        resampler = None
        if cfg.resample_theta_per_step:
            resampler = lambda: _draw_thetas(
                posterior, m, cfg.sample_theta_per_rollout, rng)
        epi, econ, _ = _batch_rollout(policy, start, gammas, betas,
                                      cost_model, cfg, rng,
                                      resampler=resampler)
    else:
        epi = np.zeros(m)
        econ = np.zeros(m)
        for k in range(m):
            params = GsirParams.__new__(GsirParams)
            object.__setattr__(params, "gamma", float(gammas[k]))
            object.__setattr__(params, "betas", tuple(betas[k]))
            epi[k], econ[k] = _scalar_rollout(policy, start, params,
                                              cost_model, cfg, rng)
    return _make_estimate(epi, econ, weight.omega)


@dataclass(frozen=True)
class CostPairEstimate:
    epi_mean: float
    econ_mean: float
    epi_ci95: tuple[float, float] | None
    econ_ci95: tuple[float, float] | None
    epi_se: float
    econ_se: float
    replications: int


def evaluate_cost_pair(policy, start: RegionState, params: GsirParams,
                       cost_model: CostModel, cfg: RolloutConfig,
                       rng: np.random.Generator, *,
                       with_ci: bool = True) -> CostPairEstimate:
    """Fixed-parameter evaluation returning both cost axes with
    normal-approximation 95% confidence intervals."""
    m = cfg.replications
    if with_ci and m < 25:
        raise ValueError(
            f"confidence intervals need >= 25 replications, got {m}")
    gammas = np.full(m, params.gamma)
    betas = np.tile(np.asarray(params.betas), (m, 1))
    if _supports_batch(policy):
        epi, econ, _ = _batch_rollout(policy, start, gammas, betas,
                                      cost_model, cfg, rng)
    else:
        epi = np.zeros(m)
        econ = np.zeros(m)
        for k in range(m):
            epi[k], econ[k] = _scalar_rollout(policy, start, params,
                                              cost_model, cfg, rng)
    epi_se = float(epi.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    econ_se = float(econ.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    z = 1.959963984540054
    epi_ci = (float(epi.mean() - z * epi_se), float(epi.mean() + z * epi_se)) \
        if with_ci else None
    econ_ci = (float(econ.mean() - z * econ_se),
               float(econ.mean() + z * econ_se)) if with_ci else None
    return CostPairEstimate(
        epi_mean=float(epi.mean()), econ_mean=float(econ.mean()),
        epi_ci95=epi_ci, econ_ci95=econ_ci,
        epi_se=epi_se, econ_se=econ_se, replications=m)


def rollout_traces(policy, start: RegionState, posterior: PosteriorParams,
                   cost_model: CostModel, cfg: RolloutConfig,
                   rng: np.random.Generator) -> dict:
    """Per-day cumulative cost and action traces over replications, for
    prediction-band construction. Requires a batch-capable policy."""
    gammas, betas = _draw_thetas(posterior, cfg.replications,
                                 cfg.sample_theta_per_rollout, rng)
    if not _supports_batch(policy):
        raise TypeError("rollout_traces needs a batch-capable policy")
    _, _, traces = _batch_rollout(policy, start, gammas, betas, cost_model,
                                  cfg, rng)
    return traces
