"""Simulation configuration, scale profiles and process settings."""

from __future__ import annotations

import json
import logging
import math
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from collab_score.errors import InvalidConfig
from collab_score.model import FamilyName
from collab_score.solver import StageConfig

HypothesisName = Literal["H1_univariate", "H2_multivariate", "H3_contrast"]
PenaltyName = Literal["L1", "SCAD", "MCP"]
VarianceName = Literal["auto", "pooled", "averaged_local", "averaged_scalar"]
TransportName = Literal["in_process", "socket"]
ProfileName = Literal["desk", "full", "paper"]

HYPOTHESIS_DIM: dict[str, int] = {"H1_univariate": 1, "H2_multivariate": 3, "H3_contrast": 2}

DESK_SCALE: dict[str, int] = {"m": 10, "n_per_site": 100, "p": 400, "replications": 200}
FULL_SCALE: dict[str, int] = {"m": 20, "n_per_site": 200, "p": 1000, "replications": 500}
PAPER_SCALE = FULL_SCALE
PROFILES: dict[str, dict[str, int]] = {"desk": DESK_SCALE, "full": FULL_SCALE, "paper": PAPER_SCALE}

# Local-alternative grids at m=20, n=200 (N=4000).
FULL_N_TOTAL = 4000
TABULATED_H_GRIDS: dict[tuple[str, str], tuple[float, ...]] = {
    ("gaussian", "H1_univariate"): (0.0, 0.015, 0.03, 0.04, 0.05),
    ("gaussian", "H2_multivariate"): (0.0, 0.02, 0.04, 0.05, 0.06),
    ("gaussian", "H3_contrast"): (0.0, 0.03, 0.05, 0.07, 0.09),
    ("logistic", "H1_univariate"): (0.0, 0.03, 0.06, 0.09, 0.12),
    ("logistic", "H2_multivariate"): (0.0, 0.03, 0.06, 0.09, 0.12),
    ("logistic", "H3_contrast"): (0.0, 0.10, 0.15, 0.20, 0.25),
}


class SimConfig(BaseModel):
    family: FamilyName = "gaussian"
    n_per_site: int = Field(default=100, ge=1)
    m: int = Field(default=10, ge=1)
    p: int = Field(default=400, ge=5)
    rho: float = Field(default=0.5, ge=0.0, lt=1.0)
    hypothesis: HypothesisName = "H1_univariate"
    h: float = 0.0
    h_grid: list[float] | None = None
    penalty: PenaltyName = "SCAD"
    replications: int = Field(default=200, ge=1)
    alphas: list[float] = Field(default_factory=lambda: [0.05], min_length=1)
    seed: int = Field(default=0, ge=0)
    variance_mode: VarianceName = "auto"
    run_oracle: bool = True
    transport: TransportName = "in_process"
    scenario: str | None = None
    max_outer: int = Field(default=10, ge=1)
    outer_tol: float = Field(default=1e-3, gt=0.0)
    inner_max: int = Field(default=5000, ge=1)
    inner_tol: float = Field(default=1e-10, gt=0.0)
    n_lambda: int = Field(default=30, ge=1)
    lambda_min_ratio: float = Field(default=0.01, gt=0.0, lt=1.0)

    @field_validator("alphas")
    @classmethod
    def _alphas_in_unit_interval(cls, value: list[float]) -> list[float]:
        if any(not 0.0 < alpha < 1.0 for alpha in value):
            raise ValueError("alphas must lie in (0, 1)")
        return value

    @model_validator(mode="after")
    def _dimension_leaves_nuisance(self) -> SimConfig:
        if self.p <= HYPOTHESIS_DIM[self.hypothesis]:
            raise ValueError(f"p={self.p} must exceed the number of tested coordinates")
        return self

    @property
    def d(self) -> int:
        return HYPOTHESIS_DIM[self.hypothesis]

    @property
    def n_total(self) -> int:
        return self.m * self.n_per_site

    @property
    def label(self) -> str:
        return self.scenario or f"{self.family}-{self.hypothesis}"

    def stage_config(self) -> StageConfig:
        return StageConfig(
            max_outer=self.max_outer,
            outer_tol=self.outer_tol,
            inner_max=self.inner_max,
            inner_tol=self.inner_tol,
            n_lambda=self.n_lambda,
            lambda_min_ratio=self.lambda_min_ratio,
        )

    def with_profile(self, profile: ProfileName) -> SimConfig:
        return self.model_copy(update=PROFILES[profile])

    def at(self, h: float) -> SimConfig:
        return self.model_copy(update={"h": float(h)})

    def resolved_h_grid(self) -> list[float]:
        """Explicit h_grid, else the tabulated grid rescaled to this N."""
        if self.h_grid:
            return list(self.h_grid)
        return list(scaled_h_grid(self.family, self.hypothesis, self.n_total))


def scaled_h_grid(family: str, hypothesis: str, n_total: int) -> tuple[float, ...]:
    """Tabulated local alternatives rescaled by sqrt(N_full / N) to keep e_N comparable."""
    try:
        grid = TABULATED_H_GRIDS[(family, hypothesis)]
    except KeyError as exc:
        raise InvalidConfig(f"no tabulated h-grid for {family}/{hypothesis}") from exc
    scale = math.sqrt(FULL_N_TOTAL / n_total)
    return tuple(round(h * scale, 6) for h in grid)


def load_sim_config(path: str | Path, overrides: dict[str, Any] | None = None) -> SimConfig:
    """Read a JSON or TOML document whose keys mirror SimConfig fields."""
    source = Path(path)
    try:
        raw = source.read_bytes()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {source}: {exc}") from exc
    try:
        if source.suffix.lower() == ".toml":
            doc = tomllib.loads(raw.decode("utf-8"))
        else:
            doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise InvalidConfig(f"config {source} is not valid {source.suffix or 'JSON'}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidConfig(f"config {source} must be a table of SimConfig fields")
    doc.update({key: value for key, value in (overrides or {}).items() if value is not None})
    try:
        return SimConfig.model_validate(doc)
    except ValidationError as exc:
        raise InvalidConfig(f"config {source} is invalid: {exc}") from exc


@dataclass(frozen=True, slots=True)
class HarnessSettings:
    workers: int = 4
    log_level: str = "WARNING"

    @staticmethod
    def from_env() -> HarnessSettings:
        workers_raw = os.getenv("COLLAB_SCORE_WORKERS", "4").strip()
        level_raw = os.getenv("COLLAB_SCORE_LOG_LEVEL", "WARNING").strip().upper()
        try:
            workers = int(workers_raw)
        except ValueError:
            workers = 4
        level = level_raw if isinstance(logging.getLevelName(level_raw), int) else "WARNING"
        return HarnessSettings(workers=max(workers, 1), log_level=level)
