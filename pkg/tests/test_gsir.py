"""Transition-model sampling against analytic and replay oracles."""

import numpy as np
import pytest

from epiplan.bayes import PriorSpec
from epiplan.core import DataError, GsirParams, RegionState, SeedSpec, derive_rng
from epiplan.gsir import (GseirParams, SeirState, gseir_step, gsir_rate,
                          gsir_step, reproduction_numbers, simulate,
                          trajectory_to_csv)

TRUTH = GsirParams(gamma=0.11, betas=(0.25, 0.07, 0.04))


def test_gsir_rate_hand_value():
    state = RegionState(susceptible=900, infectious=50, removed=50,
                        population=1000)
    assert gsir_rate(state, 1, TRUTH) == pytest.approx(0.25 * 900 * 50 / 1000)
    assert gsir_rate(state, 3, TRUTH) == pytest.approx(0.04 * 900 * 50 / 1000)


def test_gsir_step_matches_direct_draws():
    """The step consumes exactly one Poisson and one Binomial draw."""
    state = RegionState(susceptible=900, infectious=50, removed=50,
                        population=1000)
    rng = derive_rng(SeedSpec(master_seed=1), (1,))
    nxt, e_s, e_r = gsir_step(state, 2, TRUTH, rng)
    replay = derive_rng(SeedSpec(master_seed=1), (1,))
    expect_es = min(int(replay.poisson(0.07 * 900 * 50 / 1000)), 900)
    expect_er = int(replay.binomial(50, 0.11))
    assert (e_s, e_r) == (expect_es, expect_er)
    assert nxt.susceptible == 900 - e_s
    assert nxt.removed == 50 + e_r
    assert nxt.infectious == 1000 - nxt.susceptible - nxt.removed


def test_gsir_step_truncates_at_susceptible():
    state = RegionState(susceptible=2, infectious=990, removed=8,
                        population=1000)
    big = GsirParams(gamma=0.0, betas=(5.0, 5.0))
    rng = derive_rng(SeedSpec(master_seed=2), ())
    for _ in range(50):
        nxt, e_s, _ = gsir_step(state, 1, big, rng)
        assert 0 <= e_s <= 2
        assert nxt.susceptible >= 0


def test_gsir_step_zero_beta_and_zero_gamma():
    state = RegionState(susceptible=900, infectious=50, removed=50,
                        population=1000)
    frozen = GsirParams(gamma=0.0, betas=(0.0, 0.0))
    rng = derive_rng(SeedSpec(master_seed=3), ())
    nxt, e_s, e_r = gsir_step(state, 1, frozen, rng)
    assert (e_s, e_r) == (0, 0)
    assert nxt == state


def test_increment_moments_match_analytic():
    """Empirical increment means within 3 MC standard errors at n=1e5."""
    n = 100_000
    state = RegionState(susceptible=900, infectious=50, removed=50,
                        population=1000)
    rng = derive_rng(SeedSpec(master_seed=4), ())
    es = np.empty(n)
    er = np.empty(n)
    for k in range(n):
        _, es[k], er[k] = gsir_step(state, 1, TRUTH, rng)
    lam = 0.25 * 900 * 50 / 1000  # 11.25, far from the S=900 truncation
    assert abs(es.mean() - lam) <= 3 * es.std(ddof=1) / np.sqrt(n)
    mu_r = 50 * 0.11
    assert abs(er.mean() - mu_r) <= 3 * er.std(ddof=1) / np.sqrt(n)


def test_simulate_persistence_rule():
    """Actions only change at schedule days; otherwise the last one holds."""
    calls = []

    def policy(state):
        calls.append(state)
        return 2

    initial = RegionState(susceptible=900, infectious=50, removed=50,
                          population=1000)
    rng = derive_rng(SeedSpec(master_seed=5), ())
    traj = simulate(initial, policy, TRUTH, 10, [3, 7], rng)
    assert len(calls) == 2
    assert traj.actions == (1, 1, 2, 2, 2, 2, 2, 2, 2, 2)
    assert len(traj.states) == 11
    for k in range(10):
        pre, post = traj.states[k], traj.states[k + 1]
        assert pre.susceptible - post.susceptible == traj.new_infections[k]
        assert post.removed - pre.removed == traj.new_removals[k]


def test_seir_step_preserves_population():
    params = GseirParams(gsir=TRUTH, incubation_rate=1 / 7)
    state = SeirState(susceptible=900, exposed=30, infectious=50, removed=20,
                      population=1000)
    rng = derive_rng(SeedSpec(master_seed=6), ())
    for _ in range(30):
        state = gseir_step(state, 1, params, rng)
        total = (state.susceptible + state.exposed + state.infectious
                 + state.removed)
        assert total == 1000


def test_seir_invalid_state():
    with pytest.raises(DataError):
        SeirState(susceptible=900, exposed=30, infectious=50, removed=30,
                  population=1000)


def test_reproduction_numbers_against_mc_oracle():
    post = PriorSpec(gamma_beta_params=(178.89, 2000.0),
                     beta_gamma_params=((517.41, 2000.0), (103.48, 2000.0)))
    rng = derive_rng(SeedSpec(master_seed=7), ())
    pairs = reproduction_numbers(post, 200_000, rng)
    # E[beta/gamma] = E[beta] * E[1/gamma]; 1/gamma moments from Beta(a,b):
    # E[1/X] = (a+b-1)/(a-1)
    a, b = 178.89, 2000.0
    inv_gamma_mean = (a + b - 1) / (a - 1)
    for (mean, sd), (a_s, b_s) in zip(pairs, post.beta_gamma_params):
        expected = (a_s / b_s) * inv_gamma_mean
        assert abs(mean - expected) <= 4 * sd / np.sqrt(200_000)
    deterministic = reproduction_numbers(post, 1, rng, method="mean_ratio")
    gamma_mean = a / (a + b)
    assert deterministic[0][0] == pytest.approx((517.41 / 2000.0) / gamma_mean)


def test_trajectory_csv_golden():
    initial = RegionState(susceptible=9, infectious=1, removed=0,
                          population=10)
    frozen = GsirParams(gamma=0.0, betas=(0.0, 0.0))
    rng = derive_rng(SeedSpec(master_seed=8), ())
    traj = simulate(initial, lambda s: 1, frozen, 2, [1], rng)
    text = trajectory_to_csv(traj)
    assert text == (
        "day,susceptible,infectious,removed,action,new_infections,"
        "new_removals\n"
        "1,9,1,0,1,0,0\n"
        "2,9,1,0,1,0,0\n")
