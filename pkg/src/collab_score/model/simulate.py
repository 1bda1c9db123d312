"""Synthetic site data generation for Gaussian and logistic designs."""

from __future__ import annotations

import numpy as np
from scipy import special

from collab_score.errors import DimensionMismatch, InvalidArg
from collab_score.model.models import CovarianceSpec, FamilyKind, GlmFamily, SiteData

SeedLike = int | np.random.SeedSequence


def simulate(
    fam: GlmFamily,
    beta_star: np.ndarray,
    n: int,
    sigma: CovarianceSpec,
    seed: SeedLike,
    site_id: int = 0,
) -> SiteData:
    """Draw n rows x ~ N(0, Sigma) and responses from the family at beta_star."""
    if n < 1:
        raise InvalidArg(f"n must be >= 1, got {n}")
    coef = np.asarray(beta_star, dtype=float)
    if coef.shape != (sigma.p,):
        raise DimensionMismatch(f"beta_star has shape {coef.shape}, covariance is {sigma.p}-dimensional")

    rng = np.random.default_rng(seed)
    chol = sigma.cholesky
    x = rng.standard_normal((n, sigma.p)) @ chol.T
    eta = x @ coef
    if fam.kind is FamilyKind.GAUSSIAN:
        y = eta + rng.standard_normal(n)
    else:
        y = (rng.random(n) < special.expit(eta)).astype(float)
    return SiteData(X=x, y=y, site_id=site_id)
