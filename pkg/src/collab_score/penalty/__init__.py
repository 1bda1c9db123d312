"""Folded-concave penalty calculus."""

from collab_score.penalty.calculus import derivative, prox_weighted_l1, value
from collab_score.penalty.models import DEFAULT_SHAPE, PenaltyKind, PenaltySpec

__all__ = [
    "DEFAULT_SHAPE",
    "PenaltyKind",
    "PenaltySpec",
    "derivative",
    "prox_weighted_l1",
    "value",
]
