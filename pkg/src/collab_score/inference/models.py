"""Hypotheses and test reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

from collab_score.cluster import CommStats
from collab_score.errors import BadHypothesis, RankDeficient
from collab_score.numerics import null_space_affine

VarianceMode = Literal["pooled", "averaged_local", "averaged_scalar"]
VarianceChoice = Literal["auto", "pooled", "averaged_local", "averaged_scalar"]
VARIANCE_MODES: tuple[str, ...] = ("pooled", "averaged_local", "averaged_scalar")
DEFAULT_ALPHAS: tuple[float, ...] = (0.01, 0.05, 0.10)


@dataclass(frozen=True, slots=True)
class LinearHypothesis:
    """H0: C theta = t, with theta = beta[target_idx]."""

    C: np.ndarray
    t: np.ndarray
    target_idx: tuple[int, ...]

    def __post_init__(self) -> None:
        c_mat = np.atleast_2d(np.array(self.C, dtype=float))
        t_vec = np.atleast_1d(np.array(self.t, dtype=float)).reshape(-1)
        target = tuple(int(i) for i in self.target_idx)
        if c_mat.ndim != 2:
            raise BadHypothesis(f"C must be a matrix, got {c_mat.ndim} dimensions")
        c_mat.setflags(write=False)
        t_vec.setflags(write=False)
        object.__setattr__(self, "C", c_mat)
        object.__setattr__(self, "t", t_vec)
        object.__setattr__(self, "target_idx", target)
        self.validate()

    @staticmethod
    def from_dict(doc: dict[str, Any], target_idx: list[int] | tuple[int, ...] | None = None) -> LinearHypothesis:
        """Build from {"C": [[...]], "t": [...], "target": [...]}; target may be overridden."""
        try:
            c_mat = doc["C"]
            t_vec = doc["t"]
            target = doc.get("target") if target_idx is None else target_idx
        except (KeyError, TypeError) as exc:
            raise BadHypothesis(f"hypothesis document is missing a field: {exc}") from exc
        if target is None:
            raise BadHypothesis("hypothesis document has no target coordinates")
        return LinearHypothesis(C=np.asarray(c_mat, dtype=float), t=np.asarray(t_vec, dtype=float), target_idx=tuple(target))

    @property
    def r(self) -> int:
        return int(self.C.shape[0])

    @property
    def d(self) -> int:
        return int(self.C.shape[1])

    def validate(self, p: int | None = None) -> None:
        if self.t.shape != (self.r,):
            raise BadHypothesis(f"t has length {self.t.shape[0]}, C has {self.r} rows")
        if len(self.target_idx) != self.d:
            raise BadHypothesis(f"C has {self.d} columns but {len(self.target_idx)} target coordinates were given")
        if len(set(self.target_idx)) != self.d or any(i < 0 for i in self.target_idx):
            raise BadHypothesis(f"target coordinates {list(self.target_idx)} must be distinct and >= 0")
        if p is not None and any(i >= p for i in self.target_idx):
            raise BadHypothesis(f"target coordinates {list(self.target_idx)} exceed p={p}")
        if p is not None and self.d >= p:
            raise BadHypothesis(f"d={self.d} leaves no nuisance coordinates for p={p}")
        if not np.all(np.isfinite(self.C)) or not np.all(np.isfinite(self.t)):
            raise BadHypothesis("C and t must be finite")
        try:
            null_space_affine(self.C, self.t)
        except RankDeficient as exc:
            raise BadHypothesis(f"C must have full row rank: {exc}") from exc

    def deviation(self, theta: np.ndarray) -> np.ndarray:
        """h = C theta - t."""
        return self.C @ np.asarray(theta, dtype=float) - self.t

    def as_dict(self) -> dict[str, Any]:
        return {"C": self.C.tolist(), "t": self.t.tolist(), "target": list(self.target_idx)}


@dataclass(slots=True)
class TestReport:
    statistic: float
    df: int
    p_value: float
    reject_at: dict[float, bool]
    support: tuple[int, ...]
    comm: CommStats
    variance_mode: VarianceMode
    noncentrality_hat: float | None = None
    excluded_sites: tuple[int, ...] = ()
    oracle: bool = False
    notes: list[str] = field(default_factory=list)

    __test__ = False

    def as_dict(self) -> dict[str, Any]:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "reject_at": {f"{alpha:g}": flag for alpha, flag in sorted(self.reject_at.items())},
            "support": sorted(self.support),
            "noncentrality_hat": self.noncentrality_hat,
            "comm": self.comm.as_dict(),
            "variance_mode": self.variance_mode,
            "excluded_sites": list(self.excluded_sites),
            "oracle": self.oracle,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)
