"""A 2-state, 3-day, 2-action MDP with an exact dynamic-programming oracle,
shared by the planner unit tests and the acceptance suite."""

import numpy as np

HORIZON = 3
STATE_PENALTY = 2.0
ACTION_COST = (0.0, 1.0)
# P(next_state = 1 | state, action): action 0 is lax, action 1 intervenes.
# Chosen so the optimum is state-dependent (lax in 0, intervene in 1) with
# a Q-value margin >= 0.4 at every (state, day).
P_BAD = ((0.3, 0.1),  # from state 0
         (0.9, 0.1))  # from state 1


class ToyEnv:
    """Protocol: num_actions, feature_dim, encode, reset, step."""

    num_actions = 2
    feature_dim = 2

    def encode(self, obs, day):
        return np.array([float(obs), day / HORIZON])

    def reset(self, rng):
        return int(rng.integers(2)), 1

    def step(self, obs, day, action, rng):
        a = action - 1
        p_bad = P_BAD[obs][a]
        nxt = 1 if rng.random() < p_bad else 0
        cost = ACTION_COST[a] + (STATE_PENALTY if nxt == 1 else 0.0)
        done = day >= HORIZON
        return nxt, day + 1, cost, done


def dp_oracle():
    """Exact Q(day, state, action) and the greedy optimum per (state, day)."""
    q = np.zeros((HORIZON + 2, 2, 2))
    for day in range(HORIZON, 0, -1):
        for s in (0, 1):
            for a in (0, 1):
                val = 0.0
                for nxt, p in ((1, P_BAD[s][a]), (0, 1 - P_BAD[s][a])):
                    cost = ACTION_COST[a] + (STATE_PENALTY if nxt else 0.0)
                    future = q[day + 1, nxt].min() if day < HORIZON else 0.0
                    val += p * (cost + future)
                q[day, s, a] = val
    optimal = {(s, day): int(np.argmin(q[day, s])) + 1
               for day in range(1, HORIZON + 1) for s in (0, 1)}
    return q, optimal
