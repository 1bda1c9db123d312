"""GLM family, site data and partitioned parameter models."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Literal

import numpy as np
from scipy import linalg, special

from collab_score.errors import DimensionMismatch, EmptySite, InvalidCovariance, SchemaMismatch


class FamilyKind(str, Enum):
    GAUSSIAN = "gaussian"
    LOGISTIC = "logistic"


FamilyName = Literal["gaussian", "logistic"]


@dataclass(frozen=True, slots=True)
class GlmFamily:
    """Canonical-link GLM with unit dispersion, described by its cumulant b."""

    kind: FamilyKind

    @staticmethod
    def of(kind: FamilyKind | str) -> GlmFamily:
        return GlmFamily(kind=FamilyKind(kind))

    def cumulant(self, u: np.ndarray) -> np.ndarray:
        if self.kind is FamilyKind.GAUSSIAN:
            return 0.5 * u * u
        return np.logaddexp(0.0, u)

    def mean(self, u: np.ndarray) -> np.ndarray:
        """b'(u); expit stays finite for arbitrarily large |u|."""
        if self.kind is FamilyKind.GAUSSIAN:
            return np.asarray(u, dtype=float)
        return special.expit(u)

    def variance(self, u: np.ndarray) -> np.ndarray:
        """b''(u)."""
        if self.kind is FamilyKind.GAUSSIAN:
            return np.ones_like(np.asarray(u, dtype=float))
        mu = special.expit(u)
        return mu * (1.0 - mu)

    def check_response(self, y: np.ndarray) -> None:
        if self.kind is FamilyKind.LOGISTIC and not np.all((y == 0.0) | (y == 1.0)):
            bad = sorted({float(v) for v in np.unique(y) if v not in (0.0, 1.0)})[:3]
            raise SchemaMismatch(f"logistic responses must be 0 or 1, found {bad}")


@dataclass(frozen=True, slots=True)
class SiteData:
    X: np.ndarray
    y: np.ndarray
    site_id: int = 0

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(self.X, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float).reshape(-1)
        if x.ndim != 2:
            raise DimensionMismatch(f"X must be 2-D, got shape {x.shape}")
        if x.shape[0] == 0:
            raise EmptySite(f"site {self.site_id} holds no observations")
        if y.shape[0] != x.shape[0]:
            raise DimensionMismatch(f"X has {x.shape[0]} rows but y has {y.shape[0]} entries")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise SchemaMismatch(f"site {self.site_id} contains non-finite values")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1])

    def validate(self, family: GlmFamily) -> None:
        family.check_response(self.y)


@dataclass(frozen=True, slots=True)
class PartitionedParam:
    beta: np.ndarray
    target_idx: tuple[int, ...]
    nuisance_idx: tuple[int, ...]

    def __post_init__(self) -> None:
        beta = np.array(self.beta, dtype=float).reshape(-1)
        target = tuple(int(i) for i in self.target_idx)
        nuisance = tuple(int(i) for i in self.nuisance_idx)
        if set(target) & set(nuisance):
            raise DimensionMismatch("target and nuisance indices overlap")
        if sorted(target + nuisance) != list(range(beta.shape[0])):
            raise DimensionMismatch("target and nuisance indices must partition range(p)")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "target_idx", target)
        object.__setattr__(self, "nuisance_idx", nuisance)

    @staticmethod
    def from_target(beta: np.ndarray, target_idx: list[int] | tuple[int, ...]) -> PartitionedParam:
        p = int(np.asarray(beta).shape[0])
        chosen = set(int(i) for i in target_idx)
        nuisance = tuple(j for j in range(p) if j not in chosen)
        return PartitionedParam(beta=beta, target_idx=tuple(target_idx), nuisance_idx=nuisance)

    @property
    def p(self) -> int:
        return int(self.beta.shape[0])

    @property
    def d(self) -> int:
        return len(self.target_idx)

    def theta(self) -> np.ndarray:
        return self.beta[list(self.target_idx)]

    def gamma(self) -> np.ndarray:
        return self.beta[list(self.nuisance_idx)]

    def support(self) -> tuple[int, ...]:
        """Nuisance coordinates (original indexing) that are exactly nonzero."""
        return tuple(j for j in sorted(self.nuisance_idx) if self.beta[j] != 0.0)


@dataclass(frozen=True)
class CovarianceSpec:
    """Either a Toeplitz(rho) covariance of dimension p or an explicit SPD matrix."""

    p: int
    rho: float | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)

    @staticmethod
    def toeplitz(p: int, rho: float) -> CovarianceSpec:
        return CovarianceSpec(p=p, rho=rho)

    @staticmethod
    def explicit(matrix: np.ndarray) -> CovarianceSpec:
        sigma = np.asarray(matrix, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise InvalidCovariance(f"covariance must be square, got shape {sigma.shape}")
        return CovarianceSpec(p=sigma.shape[0], matrix=sigma)

    def dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        if self.rho is None:
            raise InvalidCovariance("covariance needs either rho or an explicit matrix")
        return linalg.toeplitz(self.rho ** np.arange(self.p))

    @cached_property
    def cholesky(self) -> np.ndarray:
        sigma = self.dense()
        if not np.allclose(sigma, sigma.T, atol=1e-10):
            raise InvalidCovariance("covariance is not symmetric")
        try:
            return np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise InvalidCovariance(f"covariance is not positive definite: {exc}") from exc
