"""Sample-averaged GLM loss, gradient, per-sample scores and Hessian."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from collab_score.errors import DimensionMismatch
from collab_score.model.models import GlmFamily, SiteData


def _linear_predictor(beta: np.ndarray, data: SiteData) -> np.ndarray:
    coef = np.asarray(beta, dtype=float)
    if coef.shape != (data.p,):
        raise DimensionMismatch(f"beta has shape {coef.shape}, expected ({data.p},)")
    return data.X @ coef


def _columns(idx: Sequence[int], p: int) -> np.ndarray:
    cols = np.asarray(list(idx), dtype=int)
    if cols.size and (cols.min() < 0 or cols.max() >= p):
        raise DimensionMismatch(f"index set {list(idx)} is outside range({p})")
    return cols


def loss(fam: GlmFamily, beta: np.ndarray, data: SiteData) -> float:
    eta = _linear_predictor(beta, data)
    return float(np.mean(fam.cumulant(eta) - data.y * eta))


def residuals(fam: GlmFamily, beta: np.ndarray, data: SiteData) -> np.ndarray:
    """b'(x_i^T beta) - y_i for every row."""
    return fam.mean(_linear_predictor(beta, data)) - data.y


def gradient(fam: GlmFamily, beta: np.ndarray, data: SiteData) -> np.ndarray:
    return data.X.T @ residuals(fam, beta, data) / data.n


def per_sample_scores(
    fam: GlmFamily,
    beta: np.ndarray,
    data: SiteData,
    idx: Sequence[int],
) -> np.ndarray:
    cols = _columns(idx, data.p)
    return residuals(fam, beta, data)[:, None] * data.X[:, cols]


def hessian(
    fam: GlmFamily,
    beta: np.ndarray,
    data: SiteData,
    idx: Sequence[int],
) -> np.ndarray:
    cols = _columns(idx, data.p)
    weights = fam.variance(_linear_predictor(beta, data))
    sub = data.X[:, cols]
    h = (sub * weights[:, None]).T @ sub / data.n
    return 0.5 * (h + h.T)


def score_covariance(
    fam: GlmFamily,
    beta: np.ndarray,
    data: SiteData,
    idx: Sequence[int],
) -> np.ndarray:
    """(1/n) S^T S for the per-sample scores S restricted to idx."""
    scores = per_sample_scores(fam, beta, data, idx)
    k = scores.T @ scores / data.n
    return 0.5 * (k + k.T)
