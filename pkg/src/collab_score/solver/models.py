"""Stage configuration and two-stage estimator results."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from collab_score.cluster import CommStats
from collab_score.errors import InvalidConfig
from collab_score.model import PartitionedParam


@dataclass(frozen=True, slots=True)
class StageConfig:
    """Outer/inner stopping rules and penalty-level grid.

    lambda_grid=None builds the default log grid from the master's lambda_max.
    path_tol is the looser tolerance used while scanning the grid for HBIC;
    the chosen level is then re-solved to inner_tol.
    An outer iterate with a coordinate above divergence_bound aborts the fit.
    """

    lambda_grid: tuple[float, ...] | None = None
    max_outer: int = 10
    outer_tol: float = 1e-3
    inner_max: int = 5000
    inner_tol: float = 1e-6
    n_lambda: int = 30
    lambda_min_ratio: float = 0.01
    path_tol: float = 1e-6
    divergence_bound: float = 1e6

    def validate(self) -> None:
        if self.lambda_grid is not None:
            grid = list(self.lambda_grid)
            if not grid:
                raise InvalidConfig("lambda_grid must not be empty")
            if any(lam <= 0 for lam in grid):
                raise InvalidConfig("lambda_grid entries must be > 0")
            if any(later >= earlier for earlier, later in zip(grid, grid[1:])):
                raise InvalidConfig("lambda_grid must be strictly decreasing")
        if self.max_outer < 1 or self.inner_max < 1:
            raise InvalidConfig("iteration limits must be >= 1")
        if self.outer_tol <= 0 or self.inner_tol <= 0 or self.path_tol <= 0:
            raise InvalidConfig("tolerances must be > 0")
        if not self.divergence_bound > 0:
            raise InvalidConfig("divergence_bound must be > 0")
        if self.n_lambda < 1 or not 0 < self.lambda_min_ratio < 1:
            raise InvalidConfig("n_lambda must be >= 1 and lambda_min_ratio in (0, 1)")


@dataclass(slots=True)
class TwoStageResult:
    beta_hat: PartitionedParam
    support: tuple[int, ...]
    anchor_trace: list[np.ndarray]
    comm: CommStats
    lambda_chosen: tuple[float, float]
    stage_one_beta: np.ndarray
    stage_two_anchors: list[np.ndarray] = field(default_factory=list)
    anchor_gradients: list[np.ndarray] = field(default_factory=list)
    iterations: tuple[int, int] = (0, 0)
    converged: bool = True
    initial_beta: np.ndarray | None = None

    @property
    def not_converged(self) -> bool:
        return not self.converged


@dataclass(slots=True)
class OracleResult:
    beta_hat: PartitionedParam
    support: tuple[int, ...]
    anchor_trace: list[np.ndarray]
    comm: CommStats
    converged: bool = True
