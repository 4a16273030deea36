"""Request/response bodies for the decision service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class RegionPayload(BaseModel):
    region_id: str
    population: int = Field(gt=0)
    gdp_annual: float = Field(ge=0)


class SeriesRowPayload(BaseModel):
    region_id: str
    day: int = Field(ge=1)
    cumulative_confirmed: int = Field(ge=0)
    action_level: int = Field(ge=1)


class PriorPayload(BaseModel):
    gamma: dict[str, float]
    betas: list[dict[str, float]]


class CostPayload(BaseModel):
    level_means: list[float]
    level_sds: list[float]


class PlannerPayload(BaseModel):
    rollouts: int = Field(default=20, ge=1)
    band_replications: int = Field(default=200, ge=2)
    # each round: {"windows": [[lo, hi, step], ...], "relative": bool}
    grid_rounds: list[dict] | None = None


class TruthPayload(BaseModel):
    gamma: float = Field(ge=0, le=1)
    betas: list[float]


class SessionConfigPayload(BaseModel):
    horizon: int = Field(ge=1)
    decision_interval: int = Field(default=7, ge=1)
    delay_d: int = Field(default=9, ge=0)
    start_day: int = Field(default=1, ge=1)
    seed: int = 0
    weights: list[float] | None = None
    priors: PriorPayload | None = None
    cost: CostPayload | None = None
    planner: PlannerPayload = Field(default_factory=PlannerPayload)
    truth: TruthPayload | None = None
    tolerance_cap: float = Field(default=2000.0, gt=0)
    mbs_replications: int = Field(default=100, ge=1)
    band_coverage: float = Field(default=0.99, gt=0, lt=1)


class DatasetPayload(BaseModel):
    regions: list[RegionPayload]
    series: list[SeriesRowPayload]


class CreateSessionRequest(BaseModel):
    config: SessionConfigPayload
    dataset: DatasetPayload


class CommitActionRequest(BaseModel):
    action: int = Field(ge=1)


class AdvanceRequest(BaseModel):
    mode: str = Field(pattern="^(simulate|ingest)$")
    # ingest mode: per-region cumulative confirmed counts for the next
    # decision_interval days
    observations: dict[str, list[int]] | None = None


class ErrorBody(BaseModel):
    code: str
    message: str
    detail: dict | list | str | None = None
