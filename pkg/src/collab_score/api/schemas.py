"""FastAPI request/response schemas."""

from __future__ import annotations

from pydantic import BaseModel, Field

from collab_score.harness.config import SimConfig


class PowerRequest(BaseModel):
    C: list[list[float]] = Field(min_length=1)
    V: list[list[float]] = Field(min_length=1)
    h: list[float] = Field(min_length=1)
    n: int = Field(ge=1)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)


class PowerResponse(BaseModel):
    power: float
    noncentrality: float
    critical_value: float


class QuantileRequest(BaseModel):
    alpha: float = Field(gt=0.0, lt=1.0)
    df: int = Field(ge=1)


class QuantileResponse(BaseModel):
    quantile: float


class SimulateRequest(BaseModel):
    config: SimConfig
    max_replications: int = Field(default=50, ge=1, le=500)


class SimulateResponse(BaseModel):
    scenario: str
    h: float
    replications: int
    rejection_rate: dict[str, float]
    oracle_rejection_rate: dict[str, float] | None = None
    agreement: float | None = None
    support_recovery: float | None = None
    mean_support_size: float
    mean_rounds: float
    failures: int
    wall_time: float
