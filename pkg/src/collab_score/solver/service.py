"""Two-stage partially penalized collaborative estimation."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from typing import TYPE_CHECKING

import numpy as np

from collab_score.cluster import Cluster
from collab_score.errors import DimensionMismatch, Diverged, InvalidArg, NonFinite
from collab_score.model import PartitionedParam
from collab_score.penalty import PenaltyKind, PenaltySpec, derivative
from collab_score.solver.hbic import lambda_grid, lambda_max, select_by_hbic
from collab_score.solver.models import OracleResult, StageConfig, TwoStageResult
from collab_score.solver.prox_grad import minimize_surrogate, nuisance_indices
from collab_score.solver.surrogate import SurrogateLoss

if TYPE_CHECKING:
    from collab_score.inference.models import LinearHypothesis

logger = logging.getLogger(__name__)

_GROWTH_STREAK = 3


class _DivergenceGuard:
    """Stops an outer loop whose iterates leave the finite, bounded region or keep growing."""

    def __init__(self, stage: str, bound: float) -> None:
        self._stage = stage
        self._bound = bound
        self._previous: float | None = None
        self._streak = 0

    def check(self, k: int, iterate: np.ndarray, value: float, delta: float) -> None:
        if not (np.all(np.isfinite(iterate)) and math.isfinite(value)):
            raise NonFinite(f"{self._stage} iteration {k} produced a non-finite estimate or surrogate value")
        peak = float(np.max(np.abs(iterate))) if iterate.size else 0.0
        if peak > self._bound:
            raise Diverged(f"{self._stage} iteration {k}: max |beta_j| = {peak:.3g} exceeds {self._bound:g}")
        growing = self._previous is not None and delta > 1.0 and delta > 2.0 * self._previous
        self._streak = self._streak + 1 if growing else 0
        self._previous = delta
        if self._streak >= _GROWTH_STREAK:
            raise Diverged(f"{self._stage} outer steps doubled {_GROWTH_STREAK} times in a row (last {delta:.3g})")


def default_grid(cluster: Cluster, target_idx: Sequence[int], cfg: StageConfig) -> tuple[float, ...]:
    if cfg.lambda_grid is not None:
        return tuple(cfg.lambda_grid)
    lam_max = lambda_max(SurrogateLoss.local(cluster), target_idx, cfg)
    return lambda_grid(lam_max, cfg.n_lambda, cfg.lambda_min_ratio)


def initial_estimator(
    cluster: Cluster,
    target_idx: Sequence[int],
    grid: Sequence[float],
    cfg: StageConfig,
) -> tuple[float, np.ndarray]:
    """Master-only l1 fit tuned by HBIC on the master's own loss. No communication."""
    local = SurrogateLoss.local(cluster)
    n_nuisance = cluster.p - len(target_idx)
    return select_by_hbic(
        local,
        lambda lam: np.full(n_nuisance, lam),
        grid,
        target_idx,
        None,
        np.zeros(cluster.p),
        cfg,
        require_nonempty=True,
        max_support=cluster.master_n // 2,
    )


def run_two_stage(
    cluster: Cluster,
    hypothesis: LinearHypothesis,
    penalty_kind: PenaltyKind | str = PenaltyKind.SCAD,
    cfg: StageConfig | None = None,
    *,
    shape: float | None = None,
) -> TwoStageResult:
    """Stage I: l1 collaborative steps. Stage II: reweighted steps under C theta = t.

    Each outer iteration of either stage costs exactly one gradient round.
    """
    config = cfg or StageConfig()
    config.validate()
    hypothesis.validate(cluster.p)
    template = PenaltySpec.of(penalty_kind, 0.0, a=shape)
    target = list(hypothesis.target_idx)
    nuisance = nuisance_indices(cluster.p, target)
    constraint = (hypothesis.C, hypothesis.t)
    start = cluster.comm
    max_support = cluster.master_n // 2

    grid = default_grid(cluster, target, config)
    init_lam, anchor = initial_estimator(cluster, target, grid, config)
    initial = anchor.copy()
    trace = [anchor.copy()]
    logger.info("initial estimator: lambda=%.4g, support %d", init_lam, int(np.count_nonzero(anchor[nuisance])))

    guard = _DivergenceGuard("stage I", config.divergence_bound)
    lam_one = float(grid[0])
    stage_one_done = False
    k_one = 0
    for k_one in range(1, config.max_outer + 1):
        g_anchor, _ = cluster.global_gradient(anchor)
        surrogate = SurrogateLoss.collaborative(cluster, anchor, g_anchor)
        lam_one, updated = select_by_hbic(
            surrogate,
            lambda lam: np.full(len(nuisance), lam),
            grid,
            target,
            None,
            anchor,
            config,
            max_support=max_support,
        )
        delta = float(np.linalg.norm(updated - anchor))
        guard.check(k_one, updated, surrogate.value(updated), delta)
        anchor = updated
        trace.append(anchor.copy())
        logger.info("stage I iteration %d: lambda=%.4g, step %.3g", k_one, lam_one, delta)
        if delta < config.outer_tol:
            stage_one_done = True
            break
    stage_one = anchor.copy()

    guard = _DivergenceGuard("stage II", config.divergence_bound)
    lam_two: float | None = None
    anchors: list[np.ndarray] = []
    gradients: list[np.ndarray] = []
    stage_two_done = False
    k_two = 0
    for k_two in range(1, config.max_outer + 1):
        g_anchor, _ = cluster.global_gradient(anchor)
        anchors.append(anchor.copy())
        gradients.append(g_anchor.copy())
        surrogate = SurrogateLoss.collaborative(cluster, anchor, g_anchor)
        magnitudes = np.abs(anchor[nuisance])

        def reweighted(lam: float, magnitudes: np.ndarray = magnitudes) -> np.ndarray:
            return np.asarray(derivative(template.with_lambda(lam), magnitudes), dtype=float)

        if lam_two is None:
            lam_two, updated = select_by_hbic(
                surrogate, reweighted, grid, target, constraint, anchor, config, max_support=max_support
            )
        else:
            updated = minimize_surrogate(
                surrogate,
                reweighted(lam_two),
                target,
                constraint,
                anchor,
                inner_max=config.inner_max,
                tol=config.inner_tol,
            )
        delta = float(np.linalg.norm(updated - anchor))
        guard.check(k_two, updated, surrogate.value(updated), delta)
        anchor = updated
        trace.append(anchor.copy())
        logger.info("stage II iteration %d: lambda=%.4g, step %.3g", k_two, lam_two, delta)
        if delta < config.outer_tol:
            stage_two_done = True
            break

    converged = stage_one_done and stage_two_done
    if not converged:
        logger.warning("two-stage estimator reached max_outer=%d without meeting outer_tol", config.max_outer)
    beta_hat = PartitionedParam.from_target(anchor, target)
    return TwoStageResult(
        beta_hat=beta_hat,
        support=beta_hat.support(),
        anchor_trace=trace,
        comm=cluster.comm.minus(start),
        lambda_chosen=(lam_one, float(lam_two if lam_two is not None else grid[0])),
        stage_one_beta=stage_one,
        stage_two_anchors=anchors,
        anchor_gradients=gradients,
        iterations=(k_one, k_two),
        converged=converged,
        initial_beta=initial,
    )


def run_oracle_stage(
    cluster: Cluster,
    hypothesis: LinearHypothesis,
    true_support: Sequence[int],
    cfg: StageConfig | None = None,
    *,
    anchors: Sequence[np.ndarray] | None = None,
    anchor_gradients: Sequence[np.ndarray] | None = None,
) -> OracleResult:
    """Stage II with gamma restricted to the true support and no penalty inside it.

    Given anchors and their global gradients (from a two-stage run) the
    oracle iterates reuse them and cost no communication; otherwise the
    procedure runs its own outer loop from the master's oracle fit.
    """
    config = cfg or StageConfig()
    config.validate()
    hypothesis.validate(cluster.p)
    target = list(hypothesis.target_idx)
    nuisance = nuisance_indices(cluster.p, target)
    support = tuple(sorted(int(j) for j in true_support))
    if set(support) - set(nuisance):
        raise InvalidArg(f"true support {list(support)} must lie in the nuisance coordinates")
    constraint = (hypothesis.C, hypothesis.t)
    zero_weights = np.zeros(len(nuisance))
    start = cluster.comm

    def solve(surrogate: SurrogateLoss, warm: np.ndarray) -> np.ndarray:
        return minimize_surrogate(
            surrogate,
            zero_weights,
            target,
            constraint,
            warm,
            inner_max=config.inner_max,
            tol=config.inner_tol,
            restrict_to=support,
        )

    if anchors is not None:
        if anchor_gradients is None or len(anchor_gradients) != len(anchors) or not anchors:
            raise DimensionMismatch("anchors and anchor_gradients must be non-empty and aligned")
        trace: list[np.ndarray] = []
        current = np.asarray(anchors[0], dtype=float)
        for anchor, g_anchor in zip(anchors, anchor_gradients, strict=True):
            current = solve(SurrogateLoss.collaborative(cluster, anchor, g_anchor), current)
            trace.append(current.copy())
        beta_hat = PartitionedParam.from_target(current, target)
        return OracleResult(beta_hat=beta_hat, support=support, anchor_trace=trace, comm=cluster.comm.minus(start))

    anchor = solve(SurrogateLoss.local(cluster), np.zeros(cluster.p))
    trace = [anchor.copy()]
    converged = False
    guard = _DivergenceGuard("oracle stage", config.divergence_bound)
    for _ in range(config.max_outer):
        g_anchor, _ = cluster.global_gradient(anchor)
        surrogate = SurrogateLoss.collaborative(cluster, anchor, g_anchor)
        updated = solve(surrogate, anchor)
        delta = float(np.linalg.norm(updated - anchor))
        guard.check(len(trace), updated, surrogate.value(updated), delta)
        anchor = updated
        trace.append(anchor.copy())
        if delta < config.outer_tol:
            converged = True
            break
    if not converged:
        logger.warning("oracle stage reached max_outer=%d without meeting outer_tol", config.max_outer)
    beta_hat = PartitionedParam.from_target(anchor, target)
    return OracleResult(
        beta_hat=beta_hat,
        support=support,
        anchor_trace=trace,
        comm=cluster.comm.minus(start),
        converged=converged,
    )
