"""Site-side computations. Raw data never leaves a SiteWorker."""

from __future__ import annotations

import numpy as np

from collab_score.errors import DimensionMismatch, InvalidArg
from collab_score.model import GlmFamily, SiteData, gradient, hessian, score_covariance
from collab_score.cluster.models import SiteInfo


class SiteWorker:
    def __init__(self, data: SiteData, fam: GlmFamily) -> None:
        data.validate(fam)
        self._data = data
        self._fam = fam
        self._beta: np.ndarray | None = None

    def info(self) -> SiteInfo:
        return SiteInfo(site_id=self._data.site_id, n_k=self._data.n, p=self._data.p)

    def receive_param(self, beta: np.ndarray) -> np.ndarray:
        """Store the broadcast parameter and reply with the local gradient."""
        coef = np.array(beta, dtype=float)
        if coef.shape != (self._data.p,):
            raise DimensionMismatch(f"broadcast has shape {coef.shape}, site expects ({self._data.p},)")
        self._beta = coef
        return gradient(self._fam, coef, self._data)

    def variance(self, idx: list[int]) -> tuple[int, np.ndarray, np.ndarray]:
        beta = self._require_param()
        return (
            self._data.n,
            hessian(self._fam, beta, self._data, idx),
            score_covariance(self._fam, beta, self._data, idx),
        )

    def local_statistic(self, idx: list[int], c: np.ndarray, g_b: np.ndarray) -> tuple[int, float]:
        """n_k * ||Omega_k g_b||^2 with Omega_k built from this site's own variance blocks."""
        from collab_score.inference.statistic import build_omega_blocks

        n_k, j_mat, k_mat = self.variance(idx)
        constraint = np.atleast_2d(np.asarray(c, dtype=float))
        s_hat = len(idx) - constraint.shape[1]
        omega, _ = build_omega_blocks(j_mat, k_mat, constraint, s_hat)
        projected = omega @ np.asarray(g_b, dtype=float)
        return n_k, float(n_k * (projected @ projected))

    def _require_param(self) -> np.ndarray:
        if self._beta is None:
            raise InvalidArg(f"site {self._data.site_id} has not received a parameter broadcast yet")
        return self._beta
