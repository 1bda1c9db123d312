"""GLM losses with canonical link and synthetic data generation."""

from collab_score.model.glm import gradient, hessian, loss, per_sample_scores, residuals, score_covariance
from collab_score.model.models import (
    CovarianceSpec,
    FamilyKind,
    FamilyName,
    GlmFamily,
    PartitionedParam,
    SiteData,
)
from collab_score.model.simulate import simulate

__all__ = [
    "CovarianceSpec",
    "FamilyKind",
    "FamilyName",
    "GlmFamily",
    "PartitionedParam",
    "SiteData",
    "gradient",
    "hessian",
    "loss",
    "per_sample_scores",
    "residuals",
    "score_covariance",
    "simulate",
]
