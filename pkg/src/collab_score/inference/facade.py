"""One-call interface: fit the two-stage estimator, then test."""

from __future__ import annotations

from collections.abc import Sequence

from collab_score.cluster import Cluster
from collab_score.inference.models import DEFAULT_ALPHAS, LinearHypothesis, TestReport, VarianceChoice
from collab_score.inference.service import cst_test, ocst_test
from collab_score.penalty import PenaltyKind
from collab_score.solver import StageConfig, TwoStageResult, run_two_stage


class CollaborativeScoreTest:
    def __init__(
        self,
        cluster: Cluster,
        penalty_kind: PenaltyKind | str = PenaltyKind.SCAD,
        cfg: StageConfig | None = None,
        variance_mode: VarianceChoice = "auto",
        alphas: Sequence[float] = DEFAULT_ALPHAS,
        bartlett: bool = False,
    ) -> None:
        self._cluster = cluster
        self._penalty_kind = PenaltyKind(penalty_kind)
        self._cfg = cfg or StageConfig()
        self._variance_mode = variance_mode
        self._alphas = tuple(alphas)
        self._bartlett = bartlett

    @property
    def cluster(self) -> Cluster:
        return self._cluster

    def fit(self, hyp: LinearHypothesis) -> TwoStageResult:
        return run_two_stage(self._cluster, hyp, self._penalty_kind, self._cfg)

    def test(self, hyp: LinearHypothesis, two_stage: TwoStageResult | None = None) -> TestReport:
        fitted = two_stage or self.fit(hyp)
        return cst_test(
            self._cluster,
            fitted,
            hyp,
            self._variance_mode,
            self._alphas,
            bartlett=self._bartlett,
        )

    def oracle(
        self,
        hyp: LinearHypothesis,
        true_support: Sequence[int],
        two_stage: TwoStageResult | None = None,
    ) -> TestReport:
        return ocst_test(
            self._cluster,
            hyp,
            true_support,
            self._cfg,
            self._variance_mode,
            self._alphas,
            two_stage=two_stage,
            bartlett=self._bartlett,
        )
