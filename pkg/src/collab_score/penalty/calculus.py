"""Folded-concave penalty values, derivatives and the weighted-l1 prox."""

from __future__ import annotations

import numpy as np

from collab_score.errors import DimensionMismatch, NegativeArg, NonpositiveStep
from collab_score.penalty.models import PenaltyKind, PenaltySpec

ArrayOrFloat = np.ndarray | float


def _magnitudes(t: ArrayOrFloat) -> np.ndarray:
    values = np.asarray(t, dtype=float)
    if np.any(values < 0):
        raise NegativeArg("penalty arguments must be >= 0")
    return values


def _unwrap(values: np.ndarray, original: ArrayOrFloat) -> ArrayOrFloat:
    if np.ndim(original) == 0:
        return float(values)
    return values


def derivative(spec: PenaltySpec, t: ArrayOrFloat) -> ArrayOrFloat:
    """d/dt q_lambda(t), un-normalized: equals lambda just above zero."""
    mags = _magnitudes(t)
    lam, a = spec.lam, spec.a
    if spec.kind is PenaltyKind.L1:
        out = np.full_like(mags, lam)
    elif spec.kind is PenaltyKind.SCAD:
        out = np.where(mags <= lam, lam, np.maximum(a * lam - mags, 0.0) / (a - 1.0))
    else:
        out = np.maximum(lam - mags / a, 0.0)
    return _unwrap(out, t)


def value(spec: PenaltySpec, t: ArrayOrFloat) -> ArrayOrFloat:
    mags = _magnitudes(t)
    lam, a = spec.lam, spec.a
    if spec.kind is PenaltyKind.L1:
        out = lam * mags
    elif spec.kind is PenaltyKind.SCAD:
        inner = lam * mags
        middle = (2.0 * a * lam * mags - mags * mags - lam * lam) / (2.0 * (a - 1.0))
        outer = np.full_like(mags, (a + 1.0) * lam * lam / 2.0)
        out = np.where(mags <= lam, inner, np.where(mags < a * lam, middle, outer))
    else:
        out = np.where(mags <= a * lam, lam * mags - mags * mags / (2.0 * a), a * lam * lam / 2.0)
    return _unwrap(out, t)


def prox_weighted_l1(v: np.ndarray, w: np.ndarray, eta: float) -> np.ndarray:
    """argmin_u 0.5 ||u - v||^2 + eta * sum_j w_j |u_j|, with exact zeros."""
    point = np.asarray(v, dtype=float)
    weights = np.asarray(w, dtype=float)
    if point.shape != weights.shape:
        raise DimensionMismatch(f"v has shape {point.shape} but w has shape {weights.shape}")
    if not eta > 0:
        raise NonpositiveStep(f"step must be > 0, got {eta}")
    shrunk = np.abs(point) - eta * weights
    return np.where(shrunk > 0.0, np.sign(point) * shrunk, 0.0)
