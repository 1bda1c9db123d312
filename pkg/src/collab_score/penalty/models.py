"""Penalty specification."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from collab_score.errors import InvalidArg


class PenaltyKind(str, Enum):
    L1 = "L1"
    SCAD = "SCAD"
    MCP = "MCP"


DEFAULT_SHAPE: dict[PenaltyKind, float] = {
    PenaltyKind.L1: 0.0,
    PenaltyKind.SCAD: 3.7,
    PenaltyKind.MCP: 3.0,
}


def _as_kind(kind: PenaltyKind | str) -> PenaltyKind:
    try:
        return PenaltyKind(kind)
    except ValueError as exc:
        raise InvalidArg(f"unknown penalty kind {kind!r}") from exc


@dataclass(frozen=True, slots=True)
class PenaltySpec:
    kind: PenaltyKind
    a: float
    lam: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", _as_kind(self.kind))
        self.validate()

    @staticmethod
    def of(kind: PenaltyKind | str, lam: float, a: float | None = None) -> PenaltySpec:
        normalized = _as_kind(kind)
        return PenaltySpec(kind=normalized, a=DEFAULT_SHAPE[normalized] if a is None else a, lam=lam)

    def with_lambda(self, lam: float) -> PenaltySpec:
        return replace(self, lam=lam)

    def validate(self) -> None:
        if not self.lam >= 0:
            raise InvalidArg(f"lambda must be >= 0, got {self.lam}")
        if self.kind is PenaltyKind.SCAD and self.a <= 2:
            raise InvalidArg(f"SCAD requires a > 2, got {self.a}")
        if self.kind is PenaltyKind.MCP and self.a <= 1:
            raise InvalidArg(f"MCP requires a > 1, got {self.a}")

    @property
    def flat_threshold(self) -> float | None:
        """Magnitude beyond which the derivative vanishes (None for L1)."""
        if self.kind is PenaltyKind.L1:
            return None
        return self.a * self.lam
