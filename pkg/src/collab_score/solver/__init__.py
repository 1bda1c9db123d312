"""Two-stage partially penalized collaborative estimator."""

from collab_score.solver.hbic import PathPoint, hbic_path, hbic_score, lambda_grid, lambda_max, select_by_hbic
from collab_score.solver.models import OracleResult, StageConfig, TwoStageResult
from collab_score.solver.prox_grad import minimize_surrogate, nuisance_indices, prox_grad_solve
from collab_score.solver.service import default_grid, initial_estimator, run_oracle_stage, run_two_stage
from collab_score.solver.surrogate import SurrogateLoss, surrogate_gradient

__all__ = [
    "OracleResult",
    "PathPoint",
    "StageConfig",
    "SurrogateLoss",
    "TwoStageResult",
    "default_grid",
    "hbic_path",
    "hbic_score",
    "initial_estimator",
    "lambda_grid",
    "lambda_max",
    "minimize_surrogate",
    "nuisance_indices",
    "prox_grad_solve",
    "run_oracle_stage",
    "run_two_stage",
    "select_by_hbic",
    "surrogate_gradient",
]
