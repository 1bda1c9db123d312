"""Collaborative score statistics, p-values and asymptotic power."""

from collab_score.inference.facade import CollaborativeScoreTest
from collab_score.inference.models import (
    DEFAULT_ALPHAS,
    LinearHypothesis,
    TestReport,
    VarianceChoice,
    VarianceMode,
)
from collab_score.inference.service import cst_test, ocst_test, score_report
from collab_score.inference.statistic import (
    asymptotic_power,
    build_omega,
    build_omega_blocks,
    cst_statistic,
    noncentrality,
    projection_matrix,
)

__all__ = [
    "DEFAULT_ALPHAS",
    "CollaborativeScoreTest",
    "LinearHypothesis",
    "TestReport",
    "VarianceChoice",
    "VarianceMode",
    "asymptotic_power",
    "build_omega",
    "build_omega_blocks",
    "cst_statistic",
    "cst_test",
    "noncentrality",
    "ocst_test",
    "projection_matrix",
    "score_report",
]
