"""Surrogate collaborative loss: master loss plus a linear gradient shift."""

from __future__ import annotations

import math

import numpy as np

from collab_score.cluster import Cluster
from collab_score.errors import DimensionMismatch
from collab_score.model import GlmFamily, SiteData

_POWER_ITERATIONS = 50


class SurrogateLoss:
    """L~(beta; anchor) = L_1(beta) + <grad L(anchor) - grad L_1(anchor), beta>.

    n_eff is the sample size the loss stands for: N for the collaborative
    surrogate, n_1 for the master's own loss.
    """

    def __init__(
        self,
        fam: GlmFamily,
        master: SiteData,
        anchor: np.ndarray,
        g_anchor: np.ndarray,
        shift: np.ndarray,
        n_eff: int,
    ) -> None:
        self._fam = fam
        self._master = master
        self.anchor = np.array(anchor, dtype=float)
        self.g_anchor = np.array(g_anchor, dtype=float)
        self.shift = np.array(shift, dtype=float)
        self.n_eff = n_eff
        if self.anchor.shape != (master.p,) or self.g_anchor.shape != (master.p,):
            raise DimensionMismatch("anchor and its gradient must have length p")

    @staticmethod
    def collaborative(cluster: Cluster, anchor: np.ndarray, g_anchor: np.ndarray) -> SurrogateLoss:
        shift = np.asarray(g_anchor, dtype=float) - cluster.master_gradient(anchor)
        return SurrogateLoss(cluster.fam, cluster.master_data, anchor, g_anchor, shift, cluster.n_total)

    @staticmethod
    def local(cluster: Cluster, anchor: np.ndarray | None = None) -> SurrogateLoss:
        """The master's own loss (zero shift), used for the initial estimator."""
        point = np.zeros(cluster.p) if anchor is None else np.asarray(anchor, dtype=float)
        g = cluster.master_gradient(point)
        return SurrogateLoss(cluster.fam, cluster.master_data, point, g, np.zeros(cluster.p), cluster.master_n)

    @property
    def p(self) -> int:
        return self._master.p

    def value(self, beta: np.ndarray) -> float:
        return self.evaluate(beta)[0]

    def gradient(self, beta: np.ndarray) -> np.ndarray:
        coef = np.asarray(beta, dtype=float)
        if np.array_equal(coef, self.anchor):
            return self.g_anchor.copy()
        return self.evaluate(coef)[1]

    def evaluate(self, beta: np.ndarray) -> tuple[float, np.ndarray]:
        coef = np.asarray(beta, dtype=float)
        eta = self._master.X @ coef
        value = float(np.mean(self._fam.cumulant(eta) - self._master.y * eta)) + float(self.shift @ coef)
        resid = self._fam.mean(eta) - self._master.y
        grad = self._master.X.T @ resid / self._master.n + self.shift
        return value, grad

    def smooth_value(self, beta: np.ndarray) -> float:
        coef = np.asarray(beta, dtype=float)
        eta = self._master.X @ coef
        return float(np.mean(self._fam.cumulant(eta) - self._master.y * eta)) + float(self.shift @ coef)

    def curvature_bound(self) -> float:
        """Power-iteration estimate of ||X_1^T W X_1 / n_1||_2 at the anchor."""
        x = self._master.X
        weights = self._fam.variance(x @ self.anchor)
        rng = np.random.default_rng(0)
        v = rng.standard_normal(self.p)
        v /= np.linalg.norm(v)
        estimate = 0.0
        for _ in range(_POWER_ITERATIONS):
            w = x.T @ (weights * (x @ v)) / self._master.n
            norm = float(np.linalg.norm(w))
            if norm == 0.0:
                return 1.0
            v = w / norm
            if abs(norm - estimate) <= 1e-6 * norm:
                estimate = norm
                break
            estimate = norm
        return estimate

    def hbic(self, beta: np.ndarray, nuisance_idx: list[int] | tuple[int, ...]) -> float:
        """2 n_eff L~(beta) + |supp(gamma)| log(log n_eff) log p."""
        coef = np.asarray(beta, dtype=float)
        df = int(np.count_nonzero(coef[list(nuisance_idx)])) if len(nuisance_idx) else 0
        n = max(self.n_eff, 3)
        return 2.0 * self.n_eff * self.value(coef) + df * math.log(math.log(n)) * math.log(self.p)


def surrogate_gradient(
    cluster: Cluster,
    beta: np.ndarray,
    anchor: np.ndarray,
    g_global_at_anchor: np.ndarray,
) -> np.ndarray:
    return SurrogateLoss.collaborative(cluster, anchor, g_global_at_anchor).gradient(beta)
