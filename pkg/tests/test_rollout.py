"""Monte Carlo policy evaluation against exact enumeration and
degenerate-dynamics oracles."""

import math

import numpy as np
import pytest
from scipy import stats

from epiplan.bayes import PosteriorParams
from epiplan.core import GsirParams, RegionState, SeedSpec, derive_rng
from epiplan.cost import CostModel, TradeoffWeight
from epiplan.planners import ThresholdPolicy
from epiplan.rollout import (RolloutConfig, evaluate_cost_pair,
                             evaluate_policy, rollout_traces, step_counter)

FLAT_COST = CostModel(level_means=(0.0, 0.4), level_sds=(0.0, 0.0),
                      gdp_daily=2.0)


def _point_posterior(params: GsirParams) -> PosteriorParams:
    scale = 1e9
    eps = 1e-12  # hyperparameters must stay positive
    return PosteriorParams(
        gamma_beta_params=(max(params.gamma, eps) * scale,
                           max(1 - params.gamma, eps) * scale),
        beta_gamma_params=tuple((max(b, eps) * scale, scale)
                                for b in params.betas))


class ConstantPolicy:
    def __init__(self, level):
        self.level = level

    def action(self, state, day=None):
        return self.level

    def action_batch(self, infectious, day=None, **_):
        return np.full(len(infectious), self.level, dtype=np.int64)


class ScalarOnlyPolicy:
    """Same behavior without action_batch, forcing the scalar path."""

    def __init__(self, level):
        self.level = level

    def action(self, state, day=None):
        return self.level


def test_degenerate_dynamics_exact_costs():
    """beta = 0 freezes the epidemic; sd = 0 makes action costs exact."""
    params = GsirParams(gamma=0.0, betas=(0.0, 0.0))
    posterior = _point_posterior(params)
    start = RegionState(susceptible=90, infectious=5, removed=5,
                        population=100)
    cfg = RolloutConfig(replications=30, horizon=10, schedule=(1,),
                        sample_theta_per_rollout=False)
    for policy in (ConstantPolicy(2), ScalarOnlyPolicy(2)):
        rng = derive_rng(SeedSpec(master_seed=41), ())
        est = evaluate_policy(policy, start, posterior, TradeoffWeight(2.0),
                              FLAT_COST, cfg, rng)
        assert est.epi_mean == pytest.approx(0.0, abs=1e-9)
        assert est.econ_mean == pytest.approx(10 * 0.4 * 2.0)
        assert est.weighted_mean == pytest.approx(
            est.epi_mean + 2.0 * est.econ_mean)
        assert est.standard_error == pytest.approx(0.0, abs=1e-9)


def _enumeration_epi_oracle(start, params, horizon):
    """Exact expected cumulative new infections by full path enumeration."""
    m = start.population
    dist = {(start.susceptible, start.infectious, start.removed): 1.0}
    expected = 0.0
    for _ in range(horizon):
        nxt = {}
        for (s, i, r), p in dist.items():
            rate = params.betas[0] * s * i / m
            for e_s in range(s + 1):
                if rate > 0:
                    p_es = (stats.poisson.pmf(e_s, rate) if e_s < s
                            else 1 - stats.poisson.cdf(s - 1, rate))
                else:
                    p_es = 1.0 if e_s == 0 else 0.0
                if p_es <= 0:
                    continue
                for e_r in range(i + 1):
                    p_er = stats.binom.pmf(e_r, i, params.gamma) if i else \
                        (1.0 if e_r == 0 else 0.0)
                    if p_er <= 0:
                        continue
                    q = p * p_es * p_er
                    expected += q * e_s
                    key = (s - e_s, m - (s - e_s) - (r + e_r), r + e_r)
                    nxt[key] = nxt.get(key, 0.0) + q
        dist = nxt
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)
    return expected


def test_mc_epi_cost_matches_enumeration_oracle():
    """3-day tiny-population rollout vs exact path enumeration."""
    params = GsirParams(gamma=0.3, betas=(0.8, 0.1))
    start = RegionState(susceptible=4, infectious=2, removed=0, population=6)
    oracle = _enumeration_epi_oracle(start, params, 3)
    cfg = RolloutConfig(replications=40_000, horizon=3, schedule=(1,))
    rng = derive_rng(SeedSpec(master_seed=42), ())
    est = evaluate_policy(ConstantPolicy(1), start, _point_posterior(params),
                          TradeoffWeight(0.0), FLAT_COST, cfg, rng)
    se = max(est.standard_error, 1e-12)
    assert abs(est.epi_mean - oracle) <= 4 * se


def test_batch_and_scalar_paths_agree_statistically():
    params = GsirParams(gamma=0.11, betas=(0.25, 0.07))
    posterior = _point_posterior(params)
    start = RegionState(susceptible=950, infectious=40, removed=10,
                        population=1000)
    cfg = RolloutConfig(replications=4000, horizon=20, schedule=(1, 8, 15))
    ests = []
    for policy in (ConstantPolicy(2), ScalarOnlyPolicy(2)):
        rng = derive_rng(SeedSpec(master_seed=43), ())
        ests.append(evaluate_policy(policy, start, posterior,
                                    TradeoffWeight(1.0),
                                    CostModel(level_means=(0.0, 0.4),
                                              level_sds=(0.0, 0.2),
                                              gdp_daily=1.0), cfg, rng))
    batch, scalar = ests
    pooled = math.hypot(batch.standard_error, scalar.standard_error)
    assert abs(batch.weighted_mean - scalar.weighted_mean) <= 4 * pooled


def test_threshold_policy_drives_batch_actions():
    """With a threshold below I the batch path must pick level 2."""
    params = GsirParams(gamma=0.0, betas=(0.0, 0.0))
    start = RegionState(susceptible=900, infectious=80, removed=20,
                        population=1000)
    policy = ThresholdPolicy(thresholds=(50.0,), tolerance_cap=500.0,
                             population=1000)
    cfg = RolloutConfig(replications=10, horizon=5, schedule=(1,),
                        sample_theta_per_rollout=False)
    rng = derive_rng(SeedSpec(master_seed=44), ())
    est = evaluate_policy(policy, start, _point_posterior(params),
                          TradeoffWeight(1.0), FLAT_COST, cfg, rng)
    assert est.econ_mean == pytest.approx(5 * 0.4 * 2.0)


def test_step_counter_budget():
    params = GsirParams(gamma=0.1, betas=(0.2, 0.1))
    start = RegionState(susceptible=90, infectious=5, removed=5,
                        population=100)
    cfg = RolloutConfig(replications=7, horizon=13, schedule=(1,))
    step_counter.reset()
    rng = derive_rng(SeedSpec(master_seed=45), ())
    evaluate_policy(ConstantPolicy(1), start, _point_posterior(params),
                    TradeoffWeight(0.0), FLAT_COST, cfg, rng)
    assert step_counter.steps == 7 * 13
    step_counter.reset()


def test_cost_pair_cis():
    params = GsirParams(gamma=0.11, betas=(0.25, 0.07))
    start = RegionState(susceptible=950, infectious=40, removed=10,
                        population=1000)
    cfg = RolloutConfig(replications=100, horizon=15, schedule=(1,))
    rng = derive_rng(SeedSpec(master_seed=46), ())
    pair = evaluate_cost_pair(ConstantPolicy(1), start, params, FLAT_COST,
                              cfg, rng)
    lo, hi = pair.epi_ci95
    assert lo <= pair.epi_mean <= hi
    assert hi - lo == pytest.approx(2 * 1.959963984540054 * pair.epi_se)
    small = RolloutConfig(replications=10, horizon=15, schedule=(1,))
    with pytest.raises(ValueError):
        evaluate_cost_pair(ConstantPolicy(1), start, params, FLAT_COST,
                           small, rng)


def test_rollout_traces_shapes_and_monotonicity():
    params = GsirParams(gamma=0.11, betas=(0.25, 0.07))
    start = RegionState(susceptible=950, infectious=40, removed=10,
                        population=1000)
    cfg = RolloutConfig(replications=50, horizon=20, schedule=(3, 10),
                        start=3)
    rng = derive_rng(SeedSpec(master_seed=47), ())
    traces = rollout_traces(ConstantPolicy(2), start,
                            _point_posterior(params), FLAT_COST, cfg, rng)
    assert traces["epi"].shape == (18, 50)
    assert np.all(np.diff(traces["epi"], axis=0) >= 0)
    assert np.all(np.diff(traces["econ"], axis=0) >= 0)
    assert np.all(traces["action"] == 2)
    with pytest.raises(TypeError):
        rollout_traces(ScalarOnlyPolicy(1), start, _point_posterior(params),
                       FLAT_COST, cfg, rng)


def test_config_validation():
    with pytest.raises(ValueError):
        RolloutConfig(replications=0, horizon=5, schedule=(1,))
    with pytest.raises(ValueError):
        RolloutConfig(replications=1, horizon=3, schedule=(1,), start=5)
