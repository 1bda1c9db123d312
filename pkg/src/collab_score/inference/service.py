"""Collaborative score test (CST) and its oracle counterpart (OCST)."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np

from collab_score.cluster import Cluster, CommStats, VarianceReply
from collab_score.errors import InvalidArg
from collab_score.inference.models import (
    DEFAULT_ALPHAS,
    VARIANCE_MODES,
    LinearHypothesis,
    TestReport,
    VarianceChoice,
    VarianceMode,
)
from collab_score.inference.statistic import build_omega_blocks, cst_statistic, noncentrality
from collab_score.numerics import chi2_sf
from collab_score.solver import StageConfig, TwoStageResult, run_oracle_stage

logger = logging.getLogger(__name__)


def _check_alphas(alphas: Sequence[float]) -> tuple[float, ...]:
    values = tuple(float(a) for a in alphas)
    if not values or any(not 0.0 < a < 1.0 for a in values):
        raise InvalidArg(f"alphas must be non-empty and lie in (0, 1), got {list(values)}")
    return values


def _weighted_blocks(replies: Sequence[VarianceReply], bartlett: bool) -> tuple[np.ndarray, np.ndarray]:
    """n_k-weighted averages of the local Hessians and score covariances."""
    if len(replies) == 1:
        j0 = np.array(replies[0].hessian, dtype=float)
        k0 = np.array(replies[0].score_cov, dtype=float)
    else:
        total = sum(reply.n_k for reply in replies)
        j0 = sum(reply.n_k * reply.hessian for reply in replies) / total
        k0 = sum(reply.n_k * reply.score_cov for reply in replies) / total
    return j0, (j0 if bartlett else k0)


def _resolve_mode(
    cluster: Cluster,
    requested: VarianceChoice,
    q: int,
    min_site_n: int | None,
) -> tuple[VarianceMode, int, list[str]]:
    if requested != "auto" and requested not in VARIANCE_MODES:
        raise InvalidArg(f"unknown variance mode {requested!r}")
    notes: list[str] = []
    threshold = q + 1 if min_site_n is None else max(int(min_site_n), q + 1)
    all_large = len(cluster.eligible_sites(threshold)) == cluster.m
    if requested == "pooled":
        return "pooled", threshold, notes
    if requested == "auto":
        return ("averaged_local" if all_large else "pooled"), threshold, notes
    if not all_large and min_site_n is None:
        message = f"{requested} needs n_k > {q} at every site; falling back to pooled"
        logger.warning(message)
        notes.append(message)
        return "pooled", threshold, notes
    return requested, threshold, notes


def score_report(
    cluster: Cluster,
    beta_hat: np.ndarray,
    hyp: LinearHypothesis,
    support: Sequence[int],
    variance_mode: VarianceChoice = "auto",
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    *,
    bartlett: bool = False,
    min_site_n: int | None = None,
    stage_one_theta: np.ndarray | None = None,
    prior_comm: CommStats | None = None,
    oracle: bool = False,
) -> TestReport:
    """Score statistic at beta_hat on b = (theta, gamma_S): one gradient round plus one variance round."""
    levels = _check_alphas(alphas)
    target = list(hyp.target_idx)
    nuisance_support = sorted(int(j) for j in support)
    idx = target + nuisance_support
    s_hat = len(nuisance_support)
    q = len(idx)
    beta = np.asarray(beta_hat, dtype=float)
    start = cluster.comm

    g_full, _ = cluster.global_gradient(beta)
    g_b = g_full[idx]
    mode, threshold, notes = _resolve_mode(cluster, variance_mode, q, min_site_n)
    n_total = cluster.n_total

    v_hat: np.ndarray | None = None
    excluded: tuple[int, ...] = ()
    if mode == "pooled":
        replies = cluster.collect_variance(beta, idx, min_site_n=1)
        j0, k0 = _weighted_blocks(replies, bartlett)
        omega, v_hat = build_omega_blocks(j0, k0, hyp.C, s_hat)
        statistic = cst_statistic(n_total, omega, g_b)
    elif mode == "averaged_local":
        replies = cluster.collect_variance(beta, idx, min_site_n=threshold)
        eligible_n = sum(reply.n_k for reply in replies)
        excluded = tuple(sorted({info.site_id for info in cluster.site_infos} - {reply.site_id for reply in replies}))
        total = 0.0
        for reply in replies:
            k_local = reply.hessian if bartlett else reply.score_cov
            omega_k, _ = build_omega_blocks(reply.hessian, k_local, hyp.C, s_hat)
            total += cst_statistic(reply.n_k, omega_k, g_b)
        statistic = total if eligible_n == n_total else total * n_total / eligible_n
        j0, k0 = _weighted_blocks(replies, bartlett)
        _, v_hat = build_omega_blocks(j0, k0, hyp.C, s_hat)
    else:
        if bartlett:
            raise InvalidArg("averaged_scalar sites always use their own score covariance; bartlett is unavailable")
        replies_scalar = cluster.collect_local_statistics(beta, idx, hyp.C, g_b, min_site_n=threshold)
        eligible_n = sum(reply.n_k for reply in replies_scalar)
        excluded = tuple(
            sorted({info.site_id for info in cluster.site_infos} - {reply.site_id for reply in replies_scalar})
        )
        total = sum(reply.value for reply in replies_scalar)
        statistic = total if eligible_n == n_total else total * n_total / eligible_n

    statistic = max(float(statistic), 0.0)
    p_value = chi2_sf(statistic, hyp.r)
    noncentrality_hat = None
    if v_hat is not None and stage_one_theta is not None:
        noncentrality_hat = noncentrality(v_hat, hyp.deviation(stage_one_theta), n_total)

    comm = cluster.comm.minus(start)
    if prior_comm is not None:
        comm = prior_comm.plus(comm)
    return TestReport(
        statistic=statistic,
        df=hyp.r,
        p_value=p_value,
        reject_at={alpha: p_value < alpha for alpha in levels},
        support=tuple(nuisance_support),
        comm=comm,
        variance_mode=mode,
        noncentrality_hat=noncentrality_hat,
        excluded_sites=excluded,
        oracle=oracle,
        notes=notes,
    )


def cst_test(
    cluster: Cluster,
    two_stage: TwoStageResult,
    hyp: LinearHypothesis,
    variance_mode: VarianceChoice = "auto",
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    *,
    bartlett: bool = False,
    min_site_n: int | None = None,
) -> TestReport:
    """Reject H0 when T_S exceeds the upper-alpha chi-square(r) quantile."""
    if tuple(two_stage.beta_hat.target_idx) != tuple(hyp.target_idx):
        raise InvalidArg("the two-stage fit was solved for different target coordinates")
    report = score_report(
        cluster,
        two_stage.beta_hat.beta,
        hyp,
        two_stage.support,
        variance_mode,
        alphas,
        bartlett=bartlett,
        min_site_n=min_site_n,
        stage_one_theta=two_stage.stage_one_beta[list(hyp.target_idx)],
        prior_comm=two_stage.comm,
    )
    logger.info("CST: T=%.4f df=%d p=%.4g support=%s", report.statistic, report.df, report.p_value, list(report.support))
    return report


def ocst_test(
    cluster: Cluster,
    hyp: LinearHypothesis,
    true_support: Sequence[int],
    cfg: StageConfig | None = None,
    variance_mode: VarianceChoice = "auto",
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    *,
    two_stage: TwoStageResult | None = None,
    bartlett: bool = False,
    min_site_n: int | None = None,
) -> TestReport:
    """Score test at the oracle estimator, which knows the true nuisance support.

    With two_stage given, the oracle iterates are anchored at its Stage II anchors.
    """
    if two_stage is not None:
        oracle_fit = run_oracle_stage(
            cluster,
            hyp,
            true_support,
            cfg,
            anchors=two_stage.stage_two_anchors,
            anchor_gradients=two_stage.anchor_gradients,
        )
        stage_one_theta = two_stage.stage_one_beta[list(hyp.target_idx)]
    else:
        oracle_fit = run_oracle_stage(cluster, hyp, true_support, cfg)
        stage_one_theta = None
    report = score_report(
        cluster,
        oracle_fit.beta_hat.beta,
        hyp,
        oracle_fit.support,
        variance_mode,
        alphas,
        bartlett=bartlett,
        min_site_n=min_site_n,
        stage_one_theta=stage_one_theta,
        prior_comm=oracle_fit.comm,
        oracle=True,
    )
    logger.info("OCST: T=%.4f df=%d p=%.4g", report.statistic, report.df, report.p_value)
    return report
