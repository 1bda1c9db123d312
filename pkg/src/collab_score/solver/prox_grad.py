"""Proximal-gradient solver for the partially penalized surrogate problem."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from collab_score.cluster import Cluster
from collab_score.errors import DimensionMismatch, Diverged, InvalidArg, NegativeArg, NonFinite
from collab_score.numerics import null_space_affine
from collab_score.penalty import prox_weighted_l1
from collab_score.solver.models import StageConfig
from collab_score.solver.surrogate import SurrogateLoss

if TYPE_CHECKING:
    from collab_score.inference.models import LinearHypothesis

logger = logging.getLogger(__name__)

ARMIJO = 1e-4
_BACKTRACK_FLOOR = 2.0**-40


@dataclass(frozen=True, slots=True)
class _Layout:
    """Maps the free variables (theta or u, then the unpinned gammas) to beta."""

    p: int
    target: np.ndarray
    free: np.ndarray
    theta0: np.ndarray | None
    basis: np.ndarray | None

    @property
    def n_theta_vars(self) -> int:
        if self.basis is None:
            return int(self.target.shape[0])
        return int(self.basis.shape[1])

    def expand(self, x: np.ndarray) -> np.ndarray:
        k = self.n_theta_vars
        beta = np.zeros(self.p)
        if self.basis is None:
            beta[self.target] = x[:k]
        else:
            beta[self.target] = self.theta0 + self.basis @ x[:k]
        beta[self.free] = x[k:]
        return beta

    def restrict(self, beta: np.ndarray) -> np.ndarray:
        theta = beta[self.target]
        if self.basis is not None:
            theta = self.basis.T @ (theta - self.theta0)
        return np.concatenate([theta, beta[self.free]])

    def pull_back(self, grad: np.ndarray) -> np.ndarray:
        theta_grad = grad[self.target]
        if self.basis is not None:
            theta_grad = self.basis.T @ theta_grad
        return np.concatenate([theta_grad, grad[self.free]])


def nuisance_indices(p: int, target_idx: Sequence[int]) -> list[int]:
    chosen = {int(i) for i in target_idx}
    return [j for j in range(p) if j not in chosen]


def minimize_surrogate(
    surrogate: SurrogateLoss,
    weights: np.ndarray,
    target_idx: Sequence[int] = (),
    constraint: tuple[np.ndarray, np.ndarray] | None = None,
    warm_start: np.ndarray | None = None,
    *,
    inner_max: int = 5000,
    tol: float = 1e-6,
    restrict_to: Sequence[int] | None = None,
    trace: list[float] | None = None,
) -> np.ndarray:
    """Minimize L~(beta) + sum_j w_j |gamma_j| by proximal gradient.

    weights are aligned with the nuisance coordinates in ascending order.
    constraint=(C, t) keeps C theta = t through theta = theta0 + Z u.
    restrict_to pins nuisance coordinates outside the given set at zero.
    trace, when given, receives the penalized objective after every step.
    """
    p = surrogate.p
    target = np.array([int(i) for i in target_idx], dtype=int)
    if len(set(target.tolist())) != target.shape[0] or np.any((target < 0) | (target >= p)):
        raise InvalidArg(f"target indices {target.tolist()} are not distinct coordinates of range({p})")
    nuisance = nuisance_indices(p, target.tolist())
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(nuisance),):
        raise DimensionMismatch(f"weights have shape {w.shape}, expected ({len(nuisance)},)")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise NegativeArg("penalty weights must be finite and >= 0")

    if restrict_to is None:
        keep = np.ones(len(nuisance), dtype=bool)
    else:
        allowed = {int(j) for j in restrict_to}
        unknown = allowed - set(nuisance)
        if unknown:
            raise InvalidArg(f"restrict_to names non-nuisance coordinates {sorted(unknown)}")
        keep = np.array([j in allowed for j in nuisance], dtype=bool)
    free = np.array(nuisance, dtype=int)[keep]

    if constraint is None:
        layout = _Layout(p=p, target=target, free=free, theta0=None, basis=None)
    else:
        c_mat, t_vec = constraint
        theta0, basis = null_space_affine(c_mat, t_vec)
        if theta0.shape[0] != target.shape[0]:
            raise DimensionMismatch(f"C has {theta0.shape[0]} columns but {target.shape[0]} targets were given")
        layout = _Layout(p=p, target=target, free=free, theta0=theta0, basis=basis)

    start = surrogate.anchor if warm_start is None else np.asarray(warm_start, dtype=float)
    if start.shape != (p,):
        raise DimensionMismatch(f"warm start has shape {start.shape}, expected ({p},)")
    pen = np.concatenate([np.zeros(layout.n_theta_vars), w[keep]])
    x = layout.restrict(start)

    def smooth(point: np.ndarray) -> tuple[float, np.ndarray]:
        value, grad = surrogate.evaluate(layout.expand(point))
        return value, layout.pull_back(grad)

    f, g = smooth(x)
    objective = f + float(pen @ np.abs(x))
    if not np.isfinite(objective):
        raise NonFinite("surrogate objective is not finite at the starting point")
    if x.shape[0] == 0:
        return layout.expand(x)

    eta = 1.0 / max(surrogate.curvature_bound(), 1e-12)
    eta_floor = eta * _BACKTRACK_FLOOR
    converged = False
    steps = 0
    for steps in range(1, inner_max + 1):
        while True:
            candidate = prox_weighted_l1(x - eta * g, pen, eta)
            step = candidate - x
            f_new, g_new = smooth(candidate)
            objective_new = f_new + float(pen @ np.abs(candidate))
            slack = 1e-13 * (1.0 + abs(objective))
            if np.isfinite(objective_new) and objective_new <= objective - ARMIJO / eta * float(step @ step) + slack:
                break
            eta *= 0.5
            if eta < eta_floor:
                raise Diverged(f"backtracking hit the step floor after {steps} proximal steps")
        if not np.all(np.isfinite(g_new)):
            raise NonFinite("surrogate gradient is not finite")
        scale = max(1.0, float(np.max(np.abs(candidate))))
        relative = float(np.max(np.abs(step))) / (eta * scale)
        x, f, g, objective = candidate, f_new, g_new, objective_new
        if trace is not None:
            trace.append(objective)
        if relative < tol:
            converged = True
            break

    if not converged:
        logger.debug("proximal gradient stopped at inner_max=%d before reaching tol=%g", inner_max, tol)
    else:
        logger.debug("proximal gradient converged in %d steps (step size %.3g)", steps, eta)
    return layout.expand(x)


def prox_grad_solve(
    cluster: Cluster,
    anchor: np.ndarray,
    g_anchor: np.ndarray,
    weights: np.ndarray,
    hypothesis: LinearHypothesis | None = None,
    warm_start: np.ndarray | None = None,
    cfg: StageConfig | None = None,
    *,
    target_idx: Sequence[int] | None = None,
    restrict_to: Sequence[int] | None = None,
    constrained: bool = True,
) -> np.ndarray:
    """Solve one collaborative subproblem anchored at `anchor`.

    With a hypothesis its target coordinates are unpenalized, and C theta = t
    is enforced unless constrained=False (the Stage I problem).
    Without one, target_idx names the unpenalized coordinates.
    """
    config = cfg or StageConfig()
    config.validate()
    if hypothesis is not None:
        target = list(hypothesis.target_idx)
        constraint = (hypothesis.C, hypothesis.t) if constrained else None
    else:
        target = [] if target_idx is None else [int(i) for i in target_idx]
        constraint = None
    surrogate = SurrogateLoss.collaborative(cluster, anchor, g_anchor)
    return minimize_surrogate(
        surrogate,
        weights,
        target,
        constraint,
        warm_start,
        inner_max=config.inner_max,
        tol=config.inner_tol,
        restrict_to=restrict_to,
    )
