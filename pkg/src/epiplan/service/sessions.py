"""Session state machine, background frontier planning, and persistence.

A session owns a dataset snapshot, a decision clock, and per-decision-point
committed actions. The posterior is always recomputed from the full dataset,
so incremental and from-scratch updates agree by construction. Sessions are
serialized to JSON snapshots under the state directory after every mutation
and restored on startup.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from pathlib import Path

import numpy as np

from ..bayes import PosteriorParams, PriorSpec, default_priors
from ..core import (DataError, Dataset, GsirParams, RegionMeta, RegionState,
                    SeedSpec, SurveillanceSeries, decision_points, derive_rng)
from ..cost import (CostModel, DEFAULT_LEVEL_MEANS, DEFAULT_LEVEL_SDS,
                    TradeoffWeight, weight_grid)
from ..gsir import gsir_step
from ..harness import fit_posterior
from ..observe import DelaySpec, mbs_proxy, reconstruct_states
from ..pareto import build_frontier, entry_to_dict
from ..planners import (GridRound, GridSchedule, ThresholdPolicy,
                        default_grid_schedule, grid_search)
from ..rollout import RolloutConfig, evaluate_policy
from .schemas import CreateSessionRequest, SessionConfigPayload


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str,
                 detail=None):
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail
        super().__init__(message)


def _dataset_from_payload(req: CreateSessionRequest) -> Dataset:
    rows: dict[str, dict[int, tuple[int, int]]] = {}
    metas = []
    for region in req.dataset.regions:
        if region.region_id in rows:
            raise ApiError(400, "invalid_dataset",
                           f"duplicate region {region.region_id!r}")
        rows[region.region_id] = {}
        metas.append(RegionMeta(region_id=region.region_id,
                                population=region.population,
                                gdp_annual=region.gdp_annual))
    for row in req.dataset.series:
        if row.region_id not in rows:
            raise ApiError(400, "invalid_dataset",
                           f"series row for unknown region {row.region_id!r}")
        if row.day in rows[row.region_id]:
            raise ApiError(400, "invalid_dataset",
                           f"duplicate day {row.day} for region "
                           f"{row.region_id!r}")
        rows[row.region_id][row.day] = (row.cumulative_confirmed,
                                        row.action_level)
    pairs = []
    for meta in metas:
        days = sorted(rows[meta.region_id])
        if days != list(range(1, len(days) + 1)):
            raise ApiError(400, "invalid_dataset",
                           f"days for region {meta.region_id!r} are not "
                           f"contiguous from 1")
        try:
            series = SurveillanceSeries(
                region_id=meta.region_id,
                cumulative_confirmed=tuple(
                    rows[meta.region_id][d][0] for d in days),
                actions=tuple(rows[meta.region_id][d][1] for d in days))
        except DataError as exc:
            raise ApiError(400, "invalid_dataset", str(exc)) from exc
        pairs.append((meta, series))
    num_levels = len(req.config.priors.betas) if req.config.priors \
        else len(default_priors().beta_gamma_params)
    try:
        return Dataset(regions=tuple(pairs), horizon=req.config.horizon,
                       decision_interval=req.config.decision_interval,
                       num_levels=num_levels)
    except DataError as exc:
        raise ApiError(400, "invalid_dataset", str(exc)) from exc


def _priors_from_config(config: SessionConfigPayload) -> PriorSpec:
    if config.priors is None:
        return default_priors()
    try:
        return PriorSpec(
            gamma_beta_params=(config.priors.gamma["a"],
                               config.priors.gamma["b"]),
            beta_gamma_params=tuple((e["a"], e["b"])
                                    for e in config.priors.betas))
    except (KeyError, DataError) as exc:
        raise ApiError(400, "invalid_priors", str(exc)) from exc


def _schedule_from_config(config: SessionConfigPayload) -> GridSchedule:
    if config.planner.grid_rounds is None:
        return default_grid_schedule()
    try:
        return GridSchedule(rounds=tuple(
            GridRound(windows=tuple(tuple(float(x) for x in w)
                                    for w in rnd["windows"]),
                      relative=bool(rnd.get("relative", False)))
            for rnd in config.planner.grid_rounds))
    except (KeyError, TypeError, DataError) as exc:
        raise ApiError(400, "invalid_planner", str(exc)) from exc


class FrontierJob:
    def __init__(self):
        self.status = "pending"
        self.progress = 0.0
        self.body: str | None = None
        self.etag: str | None = None
        self.error: str | None = None
        self.entries = None


class Session:
    def __init__(self, session_id: str, config: SessionConfigPayload,
                 dataset: Dataset, *, latent=None, current_day=None,
                 committed=None):
        self.session_id = session_id
        self.config = config
        self.dataset = dataset
        self.current_day = current_day if current_day is not None \
            else config.start_day
        self.committed: dict[str, int] = dict(committed or {})
        self.lock = threading.Lock()
        self.jobs: dict[tuple[int, str], FrontierJob] = {}
        self.priors = _priors_from_config(config)
        self.schedule = _schedule_from_config(config)
        series_len = len(dataset.regions[0][1]) if dataset.regions else 0
        if not dataset.regions:
            raise ApiError(400, "invalid_dataset", "no regions")
        if series_len < config.start_day:
            raise ApiError(400, "invalid_config",
                           f"series covers {series_len} days but start_day "
                           f"is {config.start_day}")
        if series_len - config.delay_d < 1:
            raise ApiError(400, "invalid_config",
                           f"need more than delay_d={config.delay_d} days of "
                           f"history to reconstruct any state")
        if config.start_day > config.horizon:
            raise ApiError(400, "invalid_config",
                           "start_day beyond horizon")
        self.truth = self._resolve_truth()
        self.latent = latent if latent is not None else self._initial_latent()

    # -- derived quantities -------------------------------------------------

    def seed_spec(self) -> SeedSpec:
        return SeedSpec(master_seed=self.config.seed)

    def delay(self) -> DelaySpec:
        return DelaySpec(delay_days=self.config.delay_d)

    def weights(self) -> list[TradeoffWeight]:
        if self.config.weights is None:
            return weight_grid()
        return [TradeoffWeight(omega=w) for w in self.config.weights]

    def decision_days(self) -> list[int]:
        return decision_points(self.config.horizon,
                               self.config.decision_interval,
                               self.config.start_day)

    def posterior(self) -> PosteriorParams:
        series_len = len(self.dataset.regions[0][1])
        return fit_posterior(self.dataset, until_day=series_len,
                             delay=self.delay(), priors=self.priors)

    def cost_model_for(self, meta: RegionMeta) -> CostModel:
        if self.config.cost is None:
            means, sds = DEFAULT_LEVEL_MEANS, DEFAULT_LEVEL_SDS
        else:
            means = tuple(self.config.cost.level_means)
            sds = tuple(self.config.cost.level_sds)
        return CostModel(level_means=means, level_sds=sds,
                         gdp_daily=meta.gdp_annual / 365.0)

    def region_index(self, region_id: str) -> int:
        for idx, (meta, _) in enumerate(self.dataset.regions):
            if meta.region_id == region_id:
                return idx
        raise ApiError(404, "unknown_region",
                       f"no region {region_id!r} in this session")

    def _resolve_truth(self) -> GsirParams:
        if self.config.truth is not None:
            try:
                return GsirParams(gamma=self.config.truth.gamma,
                                  betas=tuple(self.config.truth.betas))
            except DataError as exc:
                raise ApiError(400, "invalid_truth", str(exc)) from exc
        return self.posterior().mean_params()

    def _initial_latent(self) -> dict[str, list[int]]:
        """Latent truth state at the end of each observed series, for
        simulate-mode advances: the last reconstructable state rolled
        forward over the delay window under the recorded actions."""
        latent = {}
        params = self.truth
        for idx, (meta, series) in enumerate(self.dataset.regions):
            states = reconstruct_states(series, meta, self.delay())
            state = states[-1]
            window = series.actions[len(states):]
            rng = derive_rng(self.seed_spec(), (104, idx))
            for action in window:
                state, _, _ = gsir_step(state, action, params, rng)
            latent[meta.region_id] = [state.susceptible, state.infectious,
                                      state.removed]
        return latent

    def proxy_state(self, region_id: str) -> RegionState:
        """Decision-time state estimate for planning."""
        idx = self.region_index(region_id)
        meta, series = self.dataset.regions[idx]
        states = reconstruct_states(series, meta, self.delay())
        window = list(series.actions[len(states):])
        rng = derive_rng(self.seed_spec(), (103, self.current_day, idx))
        return mbs_proxy(states[-1], window, self.posterior().mean_params(),
                         self.config.mbs_replications, rng)

    # -- frontier planning --------------------------------------------------

    def frontier_job(self, region_id: str) -> FrontierJob:
        """Return (starting if needed) the frontier job for the current
        decision point."""
        if self.current_day not in self.decision_days():
            raise ApiError(409, "not_decision_point",
                           f"day {self.current_day} is not a decision point")
        key = (self.current_day, region_id)
        idx = self.region_index(region_id)
        if key not in self.jobs:
            job = FrontierJob()
            self.jobs[key] = job
            snapshot = self._planning_snapshot(region_id, idx)
            worker = threading.Thread(
                target=self._run_frontier_job, args=(job, snapshot),
                daemon=True)
            worker.start()
        return self.jobs[key]

    def _planning_snapshot(self, region_id: str, idx: int) -> dict:
        meta, _ = self.dataset.regions[idx]
        return {
            "day": self.current_day,
            "region_id": region_id,
            "region_index": idx,
            "posterior": self.posterior(),
            "start_state": self.proxy_state(region_id),
            "cost_model": self.cost_model_for(meta),
            "weights": self.weights(),
            "schedule": self.schedule,
            "horizon": self.config.horizon,
            "interval": self.config.decision_interval,
            "cap": min(self.config.tolerance_cap, meta.population),
            "rollouts": self.config.planner.rollouts,
            "band_replications": self.config.planner.band_replications,
            "coverage": self.config.band_coverage,
            "seed": self.seed_spec(),
        }

    def _run_frontier_job(self, job: FrontierJob, snap: dict) -> None:
        try:
            entries = compute_frontier(snap,
                                       progress=lambda p: setattr(
                                           job, "progress", p))
            body = json.dumps({
                "day": snap["day"],
                "region_id": snap["region_id"],
                "entries": [entry_to_dict(e) for e in entries],
            }, sort_keys=True, separators=(",", ":"))
            job.entries = entries
            job.body = body
            job.etag = hashlib.md5(body.encode()).hexdigest()
            job.status = "ready"
            job.progress = 1.0
        except Exception as exc:  # noqa: BLE001 - reported via the job
            job.error = f"{type(exc).__name__}: {exc}"
            job.status = "failed"

    # -- state machine ------------------------------------------------------

    def commit_action(self, region_id: str, action: int) -> dict:
        idx = self.region_index(region_id)
        del idx
        if self.current_day not in self.decision_days():
            raise ApiError(409, "not_decision_point",
                           f"day {self.current_day} is not a decision point")
        if not 1 <= action <= self.dataset.num_levels:
            raise ApiError(400, "invalid_action",
                           f"action {action} outside 1.."
                           f"{self.dataset.num_levels}")
        job = self.jobs.get((self.current_day, region_id))
        if job is None or job.status != "ready":
            raise ApiError(409, "frontier_not_ready",
                           "fetch the frontier for this region before "
                           "committing an action")
        if region_id in self.committed:
            raise ApiError(409, "already_committed",
                           f"region {region_id!r} already committed action "
                           f"{self.committed[region_id]} for day "
                           f"{self.current_day}")
        self.committed[region_id] = action
        return {"region_id": region_id, "action": action,
                "day": self.current_day}

    def advance(self, mode: str, observations: dict | None) -> dict:
        missing = [meta.region_id for meta, _ in self.dataset.regions
                   if meta.region_id not in self.committed]
        if missing:
            raise ApiError(409, "uncommitted_regions",
                           "all regions must commit an action before "
                           "advancing", detail={"missing": missing})
        interval = self.config.decision_interval
        next_day = self.current_day + interval
        if next_day > self.config.horizon:
            raise ApiError(409, "horizon_reached",
                           f"advancing to day {next_day} would pass the "
                           f"horizon {self.config.horizon}")
        if mode == "simulate":
            self._advance_simulate(interval)
        else:
            self._advance_ingest(interval, observations or {})
        self.current_day = next_day
        self.committed = {}
        self.jobs = {k: v for k, v in self.jobs.items()
                     if k[0] >= self.current_day}
        return {"current_day": self.current_day}

    def _advance_simulate(self, interval: int) -> None:
        pairs = []
        for idx, (meta, series) in enumerate(self.dataset.regions):
            action = self.committed[meta.region_id]
            s, i, r = self.latent[meta.region_id]
            state = RegionState(susceptible=s, infectious=i, removed=r,
                                population=meta.population)
            rng = derive_rng(self.seed_spec(),
                             (105, self.current_day, idx))
            counts = list(series.cumulative_confirmed)
            actions = list(series.actions)
            floor = counts[-1]
            for _ in range(interval):
                state, _, _ = gsir_step(state, action, self.truth, rng)
                floor = max(floor, state.removed)
                counts.append(floor)
                actions.append(action)
            self.latent[meta.region_id] = [state.susceptible,
                                           state.infectious, state.removed]
            pairs.append((meta, SurveillanceSeries(
                region_id=meta.region_id, cumulative_confirmed=tuple(counts),
                actions=tuple(actions))))
        self.dataset = Dataset(regions=tuple(pairs),
                               horizon=self.dataset.horizon,
                               decision_interval=interval,
                               num_levels=self.dataset.num_levels)

    def _advance_ingest(self, interval: int, observations: dict) -> None:
        pairs = []
        for meta, series in self.dataset.regions:
            rid = meta.region_id
            new_counts = observations.get(rid)
            if new_counts is None:
                raise ApiError(422, "missing_observations",
                               f"no observed counts for region {rid!r}")
            if len(new_counts) != interval:
                raise ApiError(422, "bad_observation_length",
                               f"region {rid!r}: expected {interval} daily "
                               f"counts, got {len(new_counts)}")
            prev = series.cumulative_confirmed[-1]
            for k, c in enumerate(new_counts):
                if c < prev:
                    raise ApiError(
                        422, "non_monotone_observations",
                        f"region {rid!r}: cumulative count decreases at "
                        f"appended day {k + 1} ({c} < {prev})")
                prev = c
            action = self.committed[rid]
            pairs.append((meta, SurveillanceSeries(
                region_id=rid,
                cumulative_confirmed=series.cumulative_confirmed
                + tuple(int(c) for c in new_counts),
                actions=series.actions + (action,) * interval)))
        self.dataset = Dataset(regions=tuple(pairs),
                               horizon=self.dataset.horizon,
                               decision_interval=interval,
                               num_levels=self.dataset.num_levels)

    # -- persistence --------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "session_id": self.session_id,
            "config": self.config.model_dump(),
            "current_day": self.current_day,
            "committed": self.committed,
            "latent": self.latent,
            "dataset": {
                "regions": [
                    {"region_id": m.region_id, "population": m.population,
                     "gdp_annual": m.gdp_annual}
                    for m, _ in self.dataset.regions],
                "series": [
                    {"region_id": s.region_id,
                     "cumulative_confirmed": list(s.cumulative_confirmed),
                     "actions": list(s.actions)}
                    for _, s in self.dataset.regions],
            },
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "Session":
        config = SessionConfigPayload(**snap["config"])
        metas = {r["region_id"]: RegionMeta(**r)
                 for r in snap["dataset"]["regions"]}
        pairs = tuple(
            (metas[s["region_id"]],
             SurveillanceSeries(
                 region_id=s["region_id"],
                 cumulative_confirmed=tuple(s["cumulative_confirmed"]),
                 actions=tuple(s["actions"])))
            for s in snap["dataset"]["series"])
        num_levels = len(config.priors.betas) if config.priors \
            else len(default_priors().beta_gamma_params)
        dataset = Dataset(regions=pairs, horizon=config.horizon,
                          decision_interval=config.decision_interval,
                          num_levels=num_levels)
        return cls(snap["session_id"], config, dataset,
                   latent=snap["latent"], current_day=snap["current_day"],
                   committed=snap["committed"])

    def summary(self) -> dict:
        posterior = self.posterior()
        return {
            "session_id": self.session_id,
            "current_day": self.current_day,
            "horizon": self.config.horizon,
            "decision_interval": self.config.decision_interval,
            "delay_d": self.config.delay_d,
            "is_decision_point": self.current_day in self.decision_days(),
            "regions": [
                {"region_id": m.region_id, "population": m.population,
                 "gdp_annual": m.gdp_annual,
                 "series_length": len(s),
                 "latest_count": s.cumulative_confirmed[-1],
                 "committed_action": self.committed.get(m.region_id)}
                for m, s in self.dataset.regions],
            "weights": [w.omega for w in self.weights()],
            "posterior": json.loads(posterior.to_json()),
            "num_levels": self.dataset.num_levels,
        }


def compute_frontier(snap: dict, progress=lambda p: None):
    """Deterministic frontier for a planning snapshot: per-weight grid
    search over threshold policies with rollout streams keyed by
    (day, region, weight, thresholds), then posterior-predictive bands."""
    weights = sorted(snap["weights"], key=lambda w: w.omega)
    omega_index = {w.omega: k for k, w in enumerate(weights)}
    schedule_days = tuple(d for d in decision_points(
        snap["horizon"], snap["interval"], snap["day"]))
    plan_cfg = RolloutConfig(
        replications=snap["rollouts"], horizon=snap["horizon"],
        schedule=schedule_days, start=snap["day"])
    done = [0]

    def planner(weight: TradeoffWeight, _rng: np.random.Generator):
        widx = omega_index[weight.omega]

        def objective(policy: ThresholdPolicy):
            labels = (102, snap["day"], snap["region_index"], widx) \
                + tuple(int(round(x * 1000)) for x in policy.thresholds)
            rng = derive_rng(snap["seed"], labels)
            return evaluate_policy(policy, snap["start_state"],
                                   snap["posterior"], weight,
                                   snap["cost_model"], plan_cfg, rng)

        result = grid_search(objective, snap["schedule"], snap["cap"],
                             population=snap["start_state"].population)
        done[0] += 1
        progress(done[0] / (len(weights) + 1))
        return result

    band_rng = derive_rng(snap["seed"],
                          (101, snap["day"], snap["region_index"]))
    entries = build_frontier(
        snap["start_state"], snap["posterior"], weights, planner,
        snap["cost_model"], plan_cfg, snap["band_replications"], band_rng,
        coverage=snap["coverage"])
    progress(1.0)
    return entries


class SessionStore:
    """In-memory registry with JSON-snapshot persistence."""

    def __init__(self, state_dir: str | Path):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        for path in sorted(self.state_dir.glob("*.json")):
            try:
                snap = json.loads(path.read_text())
                session = Session.from_snapshot(snap)
                self._sessions[session.session_id] = session
            except (ValueError, KeyError, DataError, ApiError):
                continue  # ignore corrupt snapshots rather than fail startup

    def create(self, req: CreateSessionRequest) -> Session:
        dataset = _dataset_from_payload(req)
        session_id = uuid.uuid4().hex
        try:
            session = Session(session_id, req.config, dataset)
        except DataError as exc:
            raise ApiError(400, "invalid_config", str(exc)) from exc
        with self._lock:
            self._sessions[session_id] = session
        self.persist(session)
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session",
                           f"no session {session_id!r}")
        return session

    def persist(self, session: Session) -> None:
        path = self.state_dir / f"{session.session_id}.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(session.snapshot()))
        tmp.replace(path)
