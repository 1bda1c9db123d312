"""Cluster-level models: transport kinds, communication accounting and site replies."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

BYTES_PER_DOUBLE = 8


class TransportKind(str, Enum):
    IN_PROCESS = "in_process"
    SOCKET = "socket"


@dataclass(slots=True)
class CommStats:
    rounds: int = 0
    bytes_to_sites: int = 0
    bytes_from_sites: int = 0

    def record_round(self, bytes_to_sites: int, bytes_from_sites: int) -> None:
        self.rounds += 1
        self.bytes_to_sites += bytes_to_sites
        self.bytes_from_sites += bytes_from_sites

    def snapshot(self) -> CommStats:
        return CommStats(
            rounds=self.rounds,
            bytes_to_sites=self.bytes_to_sites,
            bytes_from_sites=self.bytes_from_sites,
        )

    def minus(self, earlier: CommStats) -> CommStats:
        return CommStats(
            rounds=self.rounds - earlier.rounds,
            bytes_to_sites=self.bytes_to_sites - earlier.bytes_to_sites,
            bytes_from_sites=self.bytes_from_sites - earlier.bytes_from_sites,
        )

    def plus(self, other: CommStats) -> CommStats:
        return CommStats(
            rounds=self.rounds + other.rounds,
            bytes_to_sites=self.bytes_to_sites + other.bytes_to_sites,
            bytes_from_sites=self.bytes_from_sites + other.bytes_from_sites,
        )

    def as_dict(self) -> dict[str, int]:
        return {
            "rounds": self.rounds,
            "bytes_to_sites": self.bytes_to_sites,
            "bytes_from_sites": self.bytes_from_sites,
        }


@dataclass(frozen=True, slots=True)
class SiteInfo:
    site_id: int
    n_k: int
    p: int


@dataclass(frozen=True, slots=True)
class VarianceReply:
    site_id: int
    n_k: int
    hessian: np.ndarray
    score_cov: np.ndarray


@dataclass(frozen=True, slots=True)
class LocalStatReply:
    site_id: int
    n_k: int
    value: float


@dataclass(frozen=True, slots=True)
class ClusterSettings:
    site_workers: int = 4
    socket_timeout_sec: float = 30.0

    @staticmethod
    def from_env() -> ClusterSettings:
        workers_raw = os.getenv("COLLAB_SCORE_SITE_WORKERS", "4").strip()
        timeout_raw = os.getenv("COLLAB_SCORE_SOCKET_TIMEOUT_SEC", "30.0").strip()
        try:
            workers = int(workers_raw)
        except ValueError:
            workers = 4
        try:
            timeout = float(timeout_raw)
        except ValueError:
            timeout = 30.0
        return ClusterSettings(site_workers=max(workers, 1), socket_timeout_sec=max(timeout, 0.1))


@dataclass(slots=True)
class Broadcast:
    """Master-side record of the parameter most recently sent to every site."""

    beta: np.ndarray | None = field(default=None)

    def matches(self, beta: np.ndarray) -> bool:
        return self.beta is not None and np.array_equal(self.beta, beta)
