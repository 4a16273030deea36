"""Cost model: clamped draws, truncated-normal expectation, weight grid."""

import math

import numpy as np
import pytest
from scipy import integrate

from epiplan.core import DataError, RegionMeta, RegionState, SeedSpec, derive_rng
from epiplan.cost import (CostModel, CostPair, TradeoffWeight,
                          default_cost_model, epidemiological_cost,
                          sample_action_cost, weight_grid)

META = RegionMeta(region_id="r", population=1000, gdp_annual=365.0)


def test_default_cost_model_constants():
    model = default_cost_model(META)
    assert model.level_means == (0.0, 0.368, 0.484)
    assert model.level_sds == (0.0, 0.239, 0.181)
    assert model.gdp_daily == pytest.approx(1.0)


def test_level_one_is_free():
    model = default_cost_model(META)
    rng = derive_rng(SeedSpec(master_seed=31), ())
    assert all(sample_action_cost(model, 1, rng) == 0.0 for _ in range(20))
    assert model.expected_daily_cost(1) == 0.0


def test_expected_daily_cost_matches_quadrature():
    model = default_cost_model(META)
    for action in (2, 3):
        mu = model.level_means[action - 1]
        sd = model.level_sds[action - 1]
        oracle, _ = integrate.quad(
            lambda x: max(x, 0.0) * math.exp(-0.5 * ((x - mu) / sd) ** 2)
            / (sd * math.sqrt(2 * math.pi)), -10, 10)
        assert model.expected_daily_cost(action) == pytest.approx(oracle,
                                                                  rel=1e-9)


def test_sampled_costs_clamped_and_match_expectation():
    model = default_cost_model(META)
    rng = derive_rng(SeedSpec(master_seed=32), ())
    draws = np.array([sample_action_cost(model, 2, rng)
                      for _ in range(40_000)])
    assert draws.min() >= 0.0
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    assert abs(draws.mean() - model.expected_daily_cost(2)) <= 4 * se


def test_cost_model_validation():
    with pytest.raises(DataError):
        CostModel(level_means=(0.1, 0.3), level_sds=(0.0, 0.1),
                  gdp_daily=1.0)
    with pytest.raises(DataError):
        CostModel(level_means=(0.0, 0.3), level_sds=(0.0, -0.1),
                  gdp_daily=1.0)
    with pytest.raises(DataError):
        CostPair(epidemiological=-1.0, economic=0.0)
    with pytest.raises(DataError):
        TradeoffWeight(omega=-0.5)


def test_epidemiological_cost():
    pre = RegionState(susceptible=90, infectious=5, removed=5, population=100)
    post = RegionState(susceptible=85, infectious=8, removed=7,
                       population=100)
    assert epidemiological_cost(pre, post) == 5
    with pytest.raises(DataError):
        epidemiological_cost(post, pre)


def test_weight_grid_values():
    grid = weight_grid()
    assert len(grid) == 8
    expected = [math.exp(k) / 10 for k in (-2, 0, 1, 2, 3, 4, 5, 6)]
    assert [w.omega for w in grid] == pytest.approx(expected)
    assert grid[0].omega == pytest.approx(0.01353352832366127)
    assert grid[-1].omega == pytest.approx(40.34287934927351)
