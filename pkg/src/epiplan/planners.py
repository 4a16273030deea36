"""Policy search over two classes: interpretable threshold policies
(coarse-to-fine grid search, constrained SPSA) and a black-box DQN over the
day-augmented state space.

A threshold policy maps the infectious count to the level whose half-open
interval [lambda_j, lambda_{j+1}) contains it, with lambda_1 = 0 and
lambda_{J+1} = M. Equal thresholds give empty intervals, so the higher
level wins at the shared boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DataError, RegionState
from .rollout import ValueEstimate


@dataclass(frozen=True)
class ThresholdPolicy:
    """Infectious-count cutoffs (lambda_2 .. lambda_J) under a tolerance cap."""

    thresholds: tuple[float, ...]
    tolerance_cap: float
    population: int

    def __post_init__(self):
        lam = self.thresholds
        if not lam:
            raise DataError("need at least one threshold")
        if any(x < 0 for x in lam):
            raise DataError(f"negative threshold in {lam}")
        if any(a > b for a, b in zip(lam, lam[1:])):
            raise DataError(f"thresholds must be non-decreasing: {lam}")
        if lam[-1] > self.tolerance_cap:
            raise DataError(
                f"top threshold {lam[-1]} exceeds cap {self.tolerance_cap}")
        if self.tolerance_cap > self.population:
            raise DataError(
                f"cap {self.tolerance_cap} exceeds population "
                f"{self.population}")
        object.__setattr__(self, "thresholds", tuple(float(x) for x in lam))

    @property
    def num_levels(self) -> int:
        return len(self.thresholds) + 1

    def action(self, state: RegionState, day: int | None = None) -> int:
        return 1 + int(np.searchsorted(self.thresholds, state.infectious,
                                       side="right"))

    def __call__(self, state: RegionState) -> int:
        return self.action(state)

    def action_batch(self, infectious: np.ndarray, day: int | None = None,
                     **_) -> np.ndarray:
        return 1 + np.searchsorted(self.thresholds, infectious, side="right")


@dataclass(frozen=True)
class GridRound:
    """Per-parameter (lower, upper, step) windows for one refinement round.

    relative=True means lower/upper are offsets subtracted from / added to
    the previous round's argmin (lower clipped at 0).
    """

    windows: tuple[tuple[float, float, float], ...]
    relative: bool = False

    def __post_init__(self):
        for lo, hi, step in self.windows:
            if step <= 0:
                raise DataError(f"grid step must be positive, got {step}")
            if not self.relative and lo > hi:
                raise DataError(f"empty window [{lo}, {hi}]")


@dataclass(frozen=True)
class GridSchedule:
    rounds: tuple[GridRound, ...]

    def __post_init__(self):
        if not self.rounds:
            raise DataError("schedule needs at least one round")
        if self.rounds[0].relative:
            raise DataError("first round must use absolute windows")


def default_grid_schedule() -> GridSchedule:
    """Five coarse-to-fine rounds for J = 3; the first round spans
    [0, 300] x [0, 2000], later rounds recenter on the incumbent."""
    return GridSchedule(rounds=(
        GridRound(windows=((0.0, 300.0, 50.0), (0.0, 2000.0, 200.0))),
        GridRound(windows=((50.0, 50.0, 5.0), (200.0, 200.0, 20.0)),
                  relative=True),
        GridRound(windows=((5.0, 5.0, 1.0), (20.0, 20.0, 4.0)),
                  relative=True),
        GridRound(windows=((1.0, 1.0, 0.25), (4.0, 4.0, 1.0)),
                  relative=True),
        GridRound(windows=((0.25, 0.25, 0.01), (1.0, 1.0, 0.2)),
                  relative=True),
    ))


def _axis_values(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return np.round(lo + step * np.arange(n + 1), 9)


def _round_points(rnd: GridRound, incumbent: tuple[float, ...] | None,
                  cap: float) -> list[tuple[float, ...]]:
    axes = []
    for p, (lo, hi, step) in enumerate(rnd.windows):
        if rnd.relative:
            # anchor the refined grid on the incumbent so it always stays
            # a candidate, clipping the window into [0, cap]
            center = incumbent[p]
            n_lo = int(math.floor(lo / step + 1e-9))
            n_hi = int(math.floor(hi / step + 1e-9))
            vals = center + step * np.arange(-n_lo, n_hi + 1)
            axes.append(np.unique(np.round(np.clip(vals, 0.0, cap), 9)))
        else:
            axes.append(_axis_values(lo, min(hi, cap), step))
    points = []
    grids = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([g.ravel() for g in grids], axis=-1)
    for row in flat:
        lam = tuple(float(x) for x in row)
        if all(a <= b for a, b in zip(lam, lam[1:])) and lam[-1] <= cap:
            points.append(lam)
    return points


def grid_search(objective: Callable[[ThresholdPolicy], ValueEstimate],
                schedule: GridSchedule, cap: float, *, population: int
                ) -> tuple[ThresholdPolicy, ValueEstimate]:
    """Coarse-to-fine exhaustive search; each round evaluates every feasible
    grid point, recenters on the incumbent, and the final incumbent is the
    exact argmin over all evaluated points (ties break to the
    lexicographically smallest thresholds)."""
    evaluated: dict[tuple[float, ...], ValueEstimate] = {}
    incumbent: tuple[float, ...] | None = None
    for rnd in schedule.rounds:
        points = _round_points(rnd, incumbent, cap)
        if not points:
            raise DataError("empty feasible grid for a round")
        for lam in points:
            if lam not in evaluated:
                evaluated[lam] = objective(ThresholdPolicy(
                    thresholds=lam, tolerance_cap=cap, population=population))
        incumbent = min(evaluated,
                        key=lambda p: (evaluated[p].weighted_mean, p))
    best = incumbent
    return (ThresholdPolicy(thresholds=best, tolerance_cap=cap,
                            population=population), evaluated[best])


@dataclass(frozen=True)
class SpsaConfig:
    """Gain sequences zeta_k = step_scale / k^step_exp and
    xi_k = probe_scale / k^probe_exp, with the usual stochastic
    approximation summability constraints checked on the exponents."""

    iterations: int
    step_scale: float = 10.0
    step_exp: float = 0.602
    probe_scale: float = 20.0
    probe_exp: float = 0.101
    perturbation: str = "rademacher"

    def __post_init__(self):
        if self.iterations < 1:
            raise DataError("iterations must be >= 1")
        if not 0.5 < self.step_exp <= 1.0:
            raise DataError(
                f"step_exp must lie in (0.5, 1] for summability, "
                f"got {self.step_exp}")
        if self.probe_exp <= 0:
            raise DataError(
                f"probe_exp must be positive so probes shrink, "
                f"got {self.probe_exp}")
        if self.perturbation != "rademacher":
            raise DataError(
                f"unsupported perturbation {self.perturbation!r}")

    def step_gain(self, k: int) -> float:
        return self.step_scale / k ** self.step_exp

    def probe_gain(self, k: int) -> float:
        return self.probe_scale / k ** self.probe_exp


def _isotonic_non_decreasing(values: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators projection onto the non-decreasing cone."""
    blocks = [(float(v), 1.0) for v in values]
    merged: list[list[float]] = []
    for v, w in blocks:
        merged.append([v, w])
        while len(merged) > 1 and merged[-2][0] > merged[-1][0]:
            v2, w2 = merged.pop()
            v1, w1 = merged.pop()
            merged.append([(v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2])
    out: list[float] = []
    for v, w in merged:
        out.extend([v] * int(w))
    return np.array(out)


def project_margin(lam: np.ndarray, margin: float, cap: float) -> np.ndarray:
    """Orthogonal projection onto
    {lam: lam_2 >= margin, lam_{i+1} - lam_i >= margin, lam_J <= cap - margin}.

    Shifting z_j = lam_j - j * margin turns the margins into a plain
    ordering constraint with box bounds, where isotonic regression followed
    by clipping is the exact Euclidean projection.
    """
    lam = np.asarray(lam, dtype=float)
    n = len(lam)
    shift = margin * (np.arange(n) + 1)
    z = lam - shift
    upper = cap - margin - shift[-1]
    z = _isotonic_non_decreasing(z)
    z = np.clip(z, 0.0, max(upper, 0.0))
    return z + shift


def _feasible_probe(lam: np.ndarray, cap: float) -> tuple[float, ...]:
    """Make a perturbed point evaluable: sort and clip into [0, cap]."""
    return tuple(float(x) for x in np.clip(np.sort(lam), 0.0, cap))


def spsa_search(objective: Callable[[ThresholdPolicy], ValueEstimate],
                config: SpsaConfig, cap: float, initial: ThresholdPolicy,
                rng: np.random.Generator
                ) -> tuple[ThresholdPolicy, ValueEstimate]:
    """Constrained two-sided SPSA over the thresholds; each iteration probes
    the objective at lam +/- xi_k * Delta with a Rademacher Delta, steps
    against the gradient estimate, and projects back onto the shrinking
    feasible set. Returns the best point ever evaluated."""
    population = initial.population
    dim = len(initial.thresholds)

    def make_policy(lam: tuple[float, ...]) -> ThresholdPolicy:
        return ThresholdPolicy(thresholds=lam, tolerance_cap=cap,
                               population=population)

    best: tuple[tuple[float, ...], ValueEstimate] | None = None

    def evaluate(lam: tuple[float, ...]) -> ValueEstimate:
        nonlocal best
        est = objective(make_policy(lam))
        if best is None or (est.weighted_mean, lam) \
                < (best[1].weighted_mean, best[0]):
            best = (lam, est)
        return est

    margin0 = config.probe_gain(1) * math.sqrt(dim)
    lam = project_margin(np.asarray(initial.thresholds, dtype=float),
                         min(margin0, cap / (dim + 1)), cap)
    for k in range(1, config.iterations + 1):
        xi = config.probe_gain(k)
        zeta = config.step_gain(k)
        delta = rng.choice([-1.0, 1.0], size=dim)
        y_plus = evaluate(_feasible_probe(lam + xi * delta, cap))
        y_minus = evaluate(_feasible_probe(lam - xi * delta, cap))
        grad = (y_plus.weighted_mean - y_minus.weighted_mean) \
            / (2.0 * xi) * delta
        margin = config.probe_gain(k + 1) * math.sqrt(dim)
        lam = project_margin(lam - zeta * grad,
                             min(margin, cap / (dim + 1)), cap)
    evaluate(tuple(float(x) for x in lam))
    assert best is not None
    return make_policy(best[0]), best[1]


@dataclass(frozen=True)
class QNetConfig:
    layers: int = 5
    width: int = 32
    step_size: float = 0.0002
    exploration_epsilon: float = 0.1
    episodes: int = 500
    minibatch_size: int = 32
    replay_size: int = 10000
    target_sync: int = 100
    warmup: int = 64

    def __post_init__(self):
        if min(self.layers, self.width, self.episodes, self.minibatch_size,
               self.replay_size, self.target_sync, self.warmup) <= 0:
            raise DataError("all QNetConfig sizes must be positive")
        if self.step_size <= 0:
            raise DataError("step_size must be positive")
        if not 0.0 <= self.exploration_epsilon <= 1.0:
            raise DataError("epsilon must lie in [0, 1]")


class _Mlp:
    """Small fully connected rectifier network trained with Adam."""

    def __init__(self, in_dim: int, out_dim: int, layers: int, width: int,
                 rng: np.random.Generator):
        dims = [in_dim] + [width] * (layers - 1) + [out_dim]
        self.weights = []
        self.biases = []
        for a, b in zip(dims, dims[1:]):
            scale = math.sqrt(2.0 / a)
            self.weights.append(rng.normal(0.0, scale, size=(a, b)))
            self.biases.append(np.zeros(b))
        self._adam_m = [np.zeros_like(w) for w in self.weights] \
            + [np.zeros_like(b) for b in self.biases]
        self._adam_v = [np.zeros_like(w) for w in self.weights] \
            + [np.zeros_like(b) for b in self.biases]
        self._adam_t = 0

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def copy_from(self, other: "_Mlp") -> None:
        self.weights = [w.copy() for w in other.weights]
        self.biases = [b.copy() for b in other.biases]

    def train_step(self, x: np.ndarray, actions: np.ndarray,
                   targets: np.ndarray, lr: float) -> float:
        # forward with cached activations
        acts = [x]
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            acts.append(h)
        out = h @ self.weights[-1] + self.biases[-1]
        n = len(x)
        idx = np.arange(n)
        pred = out[idx, actions]
        err = pred - targets
        loss = float(np.mean(err ** 2))

        grad_out = np.zeros_like(out)
        grad_out[idx, actions] = 2.0 * err / n
        grads_w = []
        grads_b = []
        g = grad_out
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w.append(acts[layer].T @ g)
            grads_b.append(g.sum(axis=0))
            if layer > 0:
                g = (g @ self.weights[layer].T) * (acts[layer] > 0)
        grads_w.reverse()
        grads_b.reverse()

        self._adam_t += 1
        params = self.weights + self.biases
        grads = grads_w + grads_b
        b1, b2, eps = 0.9, 0.999, 1e-8
        for p, grad, m, v in zip(params, grads, self._adam_m, self._adam_v):
            m *= b1
            m += (1 - b1) * grad
            v *= b2
            v += (1 - b2) * grad ** 2
            mhat = m / (1 - b1 ** self._adam_t)
            vhat = v / (1 - b2 ** self._adam_t)
            p -= lr * mhat / (np.sqrt(vhat) + eps)
        return loss


class DqnPolicy:
    """Greedy (cost-minimizing) rule over a trained Q-network."""

    def __init__(self, net: _Mlp, encode: Callable[[object, int], np.ndarray],
                 num_actions: int):
        self._net = net
        self._encode = encode
        self.num_actions = num_actions

    def q_values(self, obs, day: int) -> np.ndarray:
        return self._net.forward(self._encode(obs, day)[None, :])[0]

    def action(self, obs, day: int) -> int:
        return int(np.argmin(self.q_values(obs, day))) + 1

    def action_batch(self, infectious: np.ndarray, day: int | None = None,
                     *, susceptible: np.ndarray | None = None,
                     removed: np.ndarray | None = None,
                     population: int | None = None,
                     horizon: int | None = None) -> np.ndarray:
        if susceptible is None or population is None or horizon is None:
            raise TypeError(
                "DqnPolicy.action_batch needs full compartment arrays")
        feats = np.stack([susceptible / population, infectious / population,
                          removed / population,
                          np.full(len(infectious), day / horizon)], axis=1)
        return np.argmin(self._net.forward(feats), axis=1) + 1


class DqnDivergence(RuntimeError):
    pass


def dqn_plan(environment, config: QNetConfig,
             rng: np.random.Generator) -> DqnPolicy:
    """Finite-horizon value iteration with epsilon-greedy exploration over
    model-sampled transitions, minimizing expected cumulative cost.

    The environment must expose: num_actions, feature_dim,
    encode(obs, day) -> feature vector, reset(rng) -> (obs, day), and
    step(obs, day, action, rng) -> (next_obs, next_day, cost, done).
    Costs accumulate, so Q-targets bootstrap with the minimum next-state
    Q-value (no discounting; the horizon is finite).
    """
    n_actions = environment.num_actions
    net = _Mlp(environment.feature_dim, n_actions, config.layers,
               config.width, rng)
    target = _Mlp(environment.feature_dim, n_actions, config.layers,
                  config.width, rng)
    target.copy_from(net)

    replay: list[tuple[np.ndarray, int, float, np.ndarray, bool]] = []
    updates = 0
    for _ in range(config.episodes):
        obs, day = environment.reset(rng)
        done = False
        while not done:
            feat = environment.encode(obs, day)
            if rng.random() < config.exploration_epsilon:
                action = int(rng.integers(n_actions))
            else:
                action = int(np.argmin(net.forward(feat[None, :])[0]))
            next_obs, next_day, cost, done = environment.step(
                obs, day, action + 1, rng)
            next_feat = environment.encode(next_obs, next_day)
            replay.append((feat, action, cost, next_feat, done))
            if len(replay) > config.replay_size:
                replay.pop(0)
            obs, day = next_obs, next_day

            if len(replay) >= config.warmup:
                batch_idx = rng.integers(len(replay),
                                         size=config.minibatch_size)
                feats = np.stack([replay[i][0] for i in batch_idx])
                acts = np.array([replay[i][1] for i in batch_idx])
                costs = np.array([replay[i][2] for i in batch_idx])
                nxts = np.stack([replay[i][3] for i in batch_idx])
                dones = np.array([replay[i][4] for i in batch_idx])
                next_q = target.forward(nxts).min(axis=1)
                targets = costs + np.where(dones, 0.0, next_q)
                loss = net.train_step(feats, acts, targets, config.step_size)
                if not math.isfinite(loss):
                    raise DqnDivergence(
                        f"non-finite loss after {updates} updates "
                        f"({config.episodes} episodes configured, "
                        f"lr={config.step_size})")
                updates += 1
                if updates % config.target_sync == 0:
                    target.copy_from(net)

    return DqnPolicy(net, environment.encode, n_actions)


class GsirPlanningEnv:
    """Day-augmented planning environment for the DQN: one step spans the
    days from one decision point to the next, parameters redrawn from the
    posterior each episode."""

    def __init__(self, start_state: RegionState, posterior, weight,
                 cost_model, rollout_cfg):
        self._start = start_state
        self._posterior = posterior
        self._weight = weight
        self._cost_model = cost_model
        self._cfg = rollout_cfg
        self.num_actions = posterior.num_levels
        self.feature_dim = 4
        self._theta = None

    def encode(self, obs: RegionState, day: int) -> np.ndarray:
        m = obs.population
        return np.array([obs.susceptible / m, obs.infectious / m,
                         obs.removed / m, day / self._cfg.horizon])

    def reset(self, rng: np.random.Generator):
        self._theta = self._posterior.sample(rng) \
            if self._cfg.sample_theta_per_rollout \
            else self._posterior.mean_params(project=False)
        return self._start, self._cfg.start

    def step(self, obs: RegionState, day: int, action: int,
             rng: np.random.Generator):
        from .cost import sample_action_cost
        from .gsir import gsir_step
        schedule = sorted(d for d in self._cfg.schedule if d > day)
        next_decision = schedule[0] if schedule else self._cfg.horizon + 1
        end = min(next_decision - 1, self._cfg.horizon)
        state = obs
        cost = 0.0
        for _ in range(day, end + 1):
            state, e_s, _ = gsir_step(state, action, self._theta, rng)
            cost += e_s + self._weight.omega * sample_action_cost(
                self._cost_model, action, rng)
        done = end >= self._cfg.horizon
        return state, end + 1, cost, done


def complexity_estimate(schedule: GridSchedule, m: int, b: int, k: int,
                        t: int) -> dict[str, float]:
    """Predicted evaluation budget: eta is the worst per-parameter
    points-per-round ratio of the first round; per-weight search costs
    M * T * eta^(J-1) steps and the full sweep adds B * K * T band rollouts."""
    first = schedule.rounds[0]
    eta = max((hi - lo) / step for lo, hi, step in first.windows)
    dim = len(first.windows)
    per_weight = m * t * eta ** dim
    full_tool = m * b * t * eta ** dim + b * k * t
    return {"eta": eta, "per_weight_steps": per_weight,
            "full_tool_steps": full_tool}
