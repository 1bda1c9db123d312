"""Penalty-level grids and HBIC selection."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from collab_score.cluster import Cluster
from collab_score.errors import Diverged
from collab_score.solver.models import StageConfig
from collab_score.solver.prox_grad import minimize_surrogate, nuisance_indices
from collab_score.solver.surrogate import SurrogateLoss

logger = logging.getLogger(__name__)

WeightRule = Callable[[float], np.ndarray]


@dataclass(frozen=True, slots=True)
class PathPoint:
    lam: float
    beta: np.ndarray
    score: float
    support_size: int


def hbic_score(
    cluster: Cluster,
    anchor: np.ndarray,
    g_anchor: np.ndarray,
    beta_candidate: np.ndarray,
    target_idx: Sequence[int] = (),
) -> float:
    """2N L~(beta; anchor) + |supp(gamma)| log(log N) log p."""
    surrogate = SurrogateLoss.collaborative(cluster, anchor, g_anchor)
    return surrogate.hbic(beta_candidate, nuisance_indices(cluster.p, target_idx))


def lambda_max(surrogate: SurrogateLoss, target_idx: Sequence[int], cfg: StageConfig | None = None) -> float:
    """Smallest lambda at which the l1 fit keeps every nuisance coordinate at zero.

    Computed from the theta-only fit: with gamma = 0 the KKT condition reduces
    to ||grad_gamma L~(theta_hat, 0)||_inf <= lambda.
    """
    config = cfg or StageConfig()
    nuisance = nuisance_indices(surrogate.p, target_idx)
    if not nuisance:
        return 1.0
    theta_only = minimize_surrogate(
        surrogate,
        np.zeros(len(nuisance)),
        target_idx,
        warm_start=np.zeros(surrogate.p),
        inner_max=config.inner_max,
        tol=config.inner_tol,
        restrict_to=(),
    )
    value = float(np.max(np.abs(surrogate.gradient(theta_only)[nuisance])))
    return value if value > 0 else 1.0


def lambda_grid(lam_max: float, n_lambda: int = 30, min_ratio: float = 0.01) -> tuple[float, ...]:
    if n_lambda == 1:
        return (float(lam_max),)
    return tuple(float(v) for v in np.geomspace(lam_max, lam_max * min_ratio, n_lambda))


def hbic_path(
    surrogate: SurrogateLoss,
    weights_for: WeightRule,
    grid: Sequence[float],
    target_idx: Sequence[int],
    constraint: tuple[np.ndarray, np.ndarray] | None,
    warm_start: np.ndarray,
    cfg: StageConfig,
    max_support: int | None = None,
) -> list[PathPoint]:
    """Warm-started path over a decreasing grid, solved to cfg.path_tol.

    The path stops early once the support exceeds max_support.
    """
    nuisance = nuisance_indices(surrogate.p, target_idx)
    tol = max(cfg.path_tol, cfg.inner_tol)
    points: list[PathPoint] = []
    current = np.asarray(warm_start, dtype=float)
    for lam in grid:
        current = minimize_surrogate(
            surrogate,
            weights_for(lam),
            target_idx,
            constraint,
            current,
            inner_max=cfg.inner_max,
            tol=tol,
        )
        size = int(np.count_nonzero(current[nuisance]))
        points.append(PathPoint(lam=float(lam), beta=current.copy(), score=surrogate.hbic(current, nuisance), support_size=size))
        if max_support is not None and size > max_support:
            break
    return points


def select_by_hbic(
    surrogate: SurrogateLoss,
    weights_for: WeightRule,
    grid: Sequence[float],
    target_idx: Sequence[int],
    constraint: tuple[np.ndarray, np.ndarray] | None,
    warm_start: np.ndarray,
    cfg: StageConfig,
    *,
    require_nonempty: bool = False,
    max_support: int | None = None,
) -> tuple[float, np.ndarray]:
    """Pick lambda by HBIC over the grid and re-solve it to cfg.inner_tol.

    Path points whose support exceeds max_support are never selected.
    require_nonempty steps down the grid from the HBIC choice while the
    selected model has no nuisance coordinate.
    """
    points = hbic_path(surrogate, weights_for, grid, target_idx, constraint, warm_start, cfg, max_support)
    admissible = [point for point in points if max_support is None or point.support_size <= max_support]
    if not admissible:
        raise Diverged(
            f"every penalty level on the grid selects more than {max_support} nuisance coordinates"
        )
    best = min(range(len(admissible)), key=lambda i: admissible[i].score)
    if require_nonempty:
        while admissible[best].support_size == 0 and best + 1 < len(admissible):
            best += 1
    chosen = admissible[best]
    beta = minimize_surrogate(
        surrogate,
        weights_for(chosen.lam),
        target_idx,
        constraint,
        chosen.beta,
        inner_max=cfg.inner_max,
        tol=cfg.inner_tol,
    )
    logger.debug("HBIC chose lambda=%.4g (support %d of %d path points)", chosen.lam, chosen.support_size, len(points))
    return chosen.lam, beta
