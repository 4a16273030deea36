"""Conjugate posterior estimation of the transition-model parameters.

The removal probability gamma gets a Beta prior updated against Binomial
removal increments; each per-level infection rate beta_j gets a Gamma prior
updated against Poisson infection increments restricted to the days that
level was active. Both updates are closed-form sums over transitions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from .core import DataError, GsirParams, RegionState


@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters: Beta(a, b) for gamma, Gamma(a_j, b_j) per beta_j."""

    gamma_beta_params: tuple[float, float]
    beta_gamma_params: tuple[tuple[float, float], ...]

    def __post_init__(self):
        a, b = self.gamma_beta_params
        if a <= 0 or b <= 0:
            raise DataError(f"Beta hyperparameters must be positive: {a}, {b}")
        for aj, bj in self.beta_gamma_params:
            if aj <= 0 or bj <= 0:
                raise DataError(
                    f"Gamma hyperparameters must be positive: {aj}, {bj}")

    @property
    def num_levels(self) -> int:
        return len(self.beta_gamma_params)

    def mean_params(self, *, project: bool = True) -> GsirParams:
        """Posterior/prior mean point estimate.

        Independent conjugate updates cannot enforce the level ordering, so
        with project=True the beta means are isotonically projected onto the
        non-increasing cone before constructing GsirParams.
        """
        a_r, b_r = self.gamma_beta_params
        gamma = a_r / (a_r + b_r)
        betas = self.raw_beta_means()
        if project:
            betas = _project_non_increasing(betas)
        return GsirParams(gamma=gamma, betas=tuple(betas))

    def raw_beta_means(self) -> list[float]:
        """Unprojected posterior means a_j / b_j, possibly out of order."""
        return [a / b for a, b in self.beta_gamma_params]

    def sample(self, rng: np.random.Generator,
               size: int | None = None):
        """Draw gamma and betas independently from their marginals.

        With size=None returns one GsirParams; with an integer returns
        (gammas, betas) arrays of shapes (size,) and (size, J). Draws are
        independent and need not satisfy the beta ordering.
        """
        a_r, b_r = self.gamma_beta_params
        if size is None:
            gamma = float(rng.beta(a_r, b_r))
            betas = [float(rng.gamma(a, 1.0 / b))
                     for a, b in self.beta_gamma_params]
            return _unchecked_params(gamma, betas)
        gammas = rng.beta(a_r, b_r, size=size)
        betas = np.column_stack([rng.gamma(a, 1.0 / b, size=size)
                                 for a, b in self.beta_gamma_params])
        return gammas, betas

    def to_json(self) -> str:
        a, b = self.gamma_beta_params
        return json.dumps({
            "gamma": {"a": a, "b": b},
            "betas": [{"a": aj, "b": bj} for aj, bj in self.beta_gamma_params],
        })

    @classmethod
    def from_json(cls, text: str) -> "PriorSpec":
        obj = json.loads(text)
        return cls(
            gamma_beta_params=(obj["gamma"]["a"], obj["gamma"]["b"]),
            beta_gamma_params=tuple((e["a"], e["b"]) for e in obj["betas"]),
        )


# Posteriors share the hyperparameter shape with priors.
PosteriorParams = PriorSpec


def _unchecked_params(gamma: float, betas: Sequence[float]) -> GsirParams:
    """GsirParams bypassing the ordering check (raw posterior draws)."""
    params = object.__new__(GsirParams)
    object.__setattr__(params, "gamma", float(np.clip(gamma, 0.0, 1.0)))
    object.__setattr__(params, "betas", tuple(float(b) for b in betas))
    return params


def _project_non_increasing(values: Sequence[float]) -> list[float]:
    """Pool-adjacent-violators projection onto the non-increasing cone."""
    blocks = [[float(v), 1] for v in values]
    merged: list[list[float]] = []
    for val, w in blocks:
        merged.append([val, w])
        while len(merged) > 1 and merged[-2][0] < merged[-1][0]:
            v2, w2 = merged.pop()
            v1, w1 = merged.pop()
            merged.append([(v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2])
    out: list[float] = []
    for val, w in merged:
        out.extend([val] * w)
    return out


@dataclass(frozen=True)
class TransitionRecord:
    """One observed day: states around the step and the action in force."""

    region_id: str
    day: int
    pre: RegionState
    post: RegionState
    action: int

    def __post_init__(self):
        if self.pre.population != self.post.population:
            raise DataError(
                f"population changed across transition at day {self.day}")
        if self.post.removed < self.pre.removed:
            raise DataError(f"removed count decreased at day {self.day}")
        if self.post.susceptible > self.pre.susceptible:
            raise DataError(f"susceptible count increased at day {self.day}")


def default_priors() -> PriorSpec:
    """Priors calibrated from a comparable coronavirus outbreak: level 2/3
    interventions assumed to cut the infection rate by 80% and 90%."""
    return PriorSpec(
        gamma_beta_params=(178.89, 2000.0),
        beta_gamma_params=((517.41, 2000.0), (103.48, 2000.0), (51.74, 2000.0)),
    )


def priors_from_effects(beta1_estimate: float, effects: Sequence[float],
                        concentration: float) -> PriorSpec:
    """Build Gamma priors with mean effects[j] * beta1_estimate at the given
    rate parameter; effects must start at 1 and decrease within (0, 1]."""
    if concentration <= 0:
        raise DataError(f"concentration must be positive, got {concentration}")
    effects = list(effects)
    if not effects or abs(effects[0] - 1.0) > 1e-12:
        raise DataError(f"effects must start at 1, got {effects}")
    for u_prev, u in zip(effects, effects[1:]):
        if not 0 < u <= u_prev:
            raise DataError(f"effects must be decreasing in (0,1]: {effects}")
    return PriorSpec(
        gamma_beta_params=(178.89, 2000.0),
        beta_gamma_params=tuple(
            (u * beta1_estimate * concentration, concentration)
            for u in effects),
    )


def update_posterior(prior: PriorSpec,
                     records: Iterable[TransitionRecord]) -> PosteriorParams:
    """Closed-form conjugate update from observed transitions.

    Per level j:  a_j += sum of susceptible decrements under action j,
                  b_j += sum of S*I/M exposure under action j.
    For gamma:    a += sum of removal increments,
                  b += sum of (I - removal increment).
    """
    a_r, b_r = prior.gamma_beta_params
    beta_hyper = [list(p) for p in prior.beta_gamma_params]
    for rec in records:
        if not 1 <= rec.action <= len(beta_hyper):
            raise DataError(
                f"action {rec.action} outside prior's {len(beta_hyper)} levels")
        delta_s = rec.pre.susceptible - rec.post.susceptible
        delta_r = rec.post.removed - rec.pre.removed
        exposure = (rec.pre.susceptible * rec.pre.infectious
                    / rec.pre.population)
        beta_hyper[rec.action - 1][0] += delta_s
        beta_hyper[rec.action - 1][1] += exposure
        a_r += delta_r
        b_r += rec.pre.infectious - delta_r
    return PosteriorParams(
        gamma_beta_params=(a_r, b_r),
        beta_gamma_params=tuple((a, b) for a, b in beta_hyper),
    )


def sample_params(posterior: PosteriorParams,
                  rng: np.random.Generator) -> GsirParams:
    """One joint draw of (gamma, betas) from the independent marginals."""
    return posterior.sample(rng)


def posterior_mean(posterior: PosteriorParams, *,
                   project: bool = True) -> GsirParams:
    """Point estimate at the posterior means; see PriorSpec.mean_params."""
    return posterior.mean_params(project=project)


def _moments_1d(log_density, lower: float, upper: float,
                mode_guess: float) -> tuple[float, float]:
    """Numerical (mean, variance) of an unnormalized 1D density via adaptive
    quadrature, stabilized around the density's peak."""
    probe = np.linspace(lower + 1e-12, upper - 1e-12 if np.isfinite(upper)
                        else max(10 * mode_guess, 1.0), 2001)
    log_vals = np.array([log_density(x) for x in probe])
    shift = float(log_vals.max())
    peak = float(probe[int(np.argmax(log_vals))])

    def f(x, power):
        return (x ** power) * np.exp(log_density(x) - shift)

    hi = upper if np.isfinite(upper) else probe[-1] * 3
    kwargs = dict(points=[peak], limit=400, epsabs=0, epsrel=1e-11)
    z = integrate.quad(f, lower, hi, args=(0,), **kwargs)[0]
    m1 = integrate.quad(f, lower, hi, args=(1,), **kwargs)[0] / z
    m2 = integrate.quad(f, lower, hi, args=(2,), **kwargs)[0] / z
    return m1, m2 - m1 * m1


def posterior_numeric_oracle(prior: PriorSpec,
                             records: Sequence[TransitionRecord]
                             ) -> dict[str, list[tuple[float, float]]]:
    """Quadrature posterior moments from prior density times likelihood,
    independent of the conjugate update path.

    Returns {"gamma": [(mean, var)], "betas": [(mean, var) per level]}.
    Intended for small record sets (<= 50).
    """
    records = list(records)
    if len(records) > 50:
        raise ValueError("numeric oracle is for small record sets (<= 50)")

    a_r, b_r = prior.gamma_beta_params
    removal_data = [(rec.pre.infectious, rec.post.removed - rec.pre.removed)
                    for rec in records]

    def log_post_gamma(g):
        # Beta prior times Binomial pmfs, normalization constants dropped
        # (they cancel when the quadrature normalizes the density).
        if not 0 < g < 1:
            return -np.inf
        lp = (a_r - 1) * np.log(g) + (b_r - 1) * np.log1p(-g)
        for n, k in removal_data:
            if k > n:
                return -np.inf
            lp += k * np.log(g) + (n - k) * np.log1p(-g)
        return lp

    # Rough center only used to bracket the quadrature, not as the answer.
    gamma_center = ((a_r + sum(k for _, k in removal_data))
                    / (a_r + b_r + sum(n for n, _ in removal_data)))
    gamma_moments = _moments_1d(log_post_gamma, 0.0, 1.0, gamma_center)

    beta_moments = []
    for j, (a_s, b_s) in enumerate(prior.beta_gamma_params, start=1):
        level_data = [
            (rec.pre.susceptible - rec.post.susceptible,
             rec.pre.susceptible * rec.pre.infectious / rec.pre.population)
            for rec in records if rec.action == j]

        def log_post_beta(b, level_data=level_data, a_s=a_s, b_s=b_s):
            # Gamma prior times Poisson pmfs, again up to constants.
            if b <= 0:
                return -np.inf
            lp = (a_s - 1) * np.log(b) - b_s * b
            for k, exposure in level_data:
                # Poisson(k; b * exposure) without the constant k! term
                lp += k * np.log(b * exposure) - b * exposure \
                    if exposure > 0 else (0.0 if k == 0 else -np.inf)
            return lp

        beta_center = ((a_s + sum(k for k, _ in level_data))
                       / (b_s + sum(e for _, e in level_data)))
        beta_moments.append(_moments_1d(log_post_beta, 0.0, np.inf,
                                        max(beta_center, a_s / b_s)))

    return {"gamma": [gamma_moments], "betas": beta_moments}


def records_from_states(region_id: str, states: Sequence[RegionState],
                        actions: Sequence[int], *,
                        start_day: int = 1) -> list[TransitionRecord]:
    """Pair consecutive reconstructed states into transition records; the
    action at index t drives the step from states[t] to states[t+1]."""
    records = []
    for t in range(len(states) - 1):
        records.append(TransitionRecord(
            region_id=region_id, day=start_day + t,
            pre=states[t], post=states[t + 1], action=actions[t]))
    return records


def save_posterior(posterior: PosteriorParams, path: str | Path) -> None:
    Path(path).write_text(posterior.to_json())


def load_posterior(path: str | Path) -> PosteriorParams:
    return PosteriorParams.from_json(Path(path).read_text())
