"""Master-side cluster runtime: gradient rounds, variance collection, accounting."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

from collab_score.cluster.models import (
    BYTES_PER_DOUBLE,
    Broadcast,
    ClusterSettings,
    CommStats,
    LocalStatReply,
    SiteInfo,
    TransportKind,
    VarianceReply,
)
from collab_score.cluster.transport import InProcessSite, SiteHandle, SiteServer, SocketSite
from collab_score.cluster.worker import SiteWorker
from collab_score.errors import DimensionMismatch, InvalidArg, NoEligibleSites, NonFinite
from collab_score.model import GlmFamily, SiteData, gradient, hessian

logger = logging.getLogger(__name__)

_T = TypeVar("_T")


class Cluster:
    """m sites with site 0 as the master.

    The master keeps site 0's data locally; every other site is reached only
    through its SiteHandle, and only parameter vectors, gradients and
    variance blocks on a restricted index set cross the boundary.
    """

    def __init__(
        self,
        master_data: SiteData,
        handles: Sequence[SiteHandle],
        fam: GlmFamily,
        transport: TransportKind = TransportKind.IN_PROCESS,
        settings: ClusterSettings | None = None,
        servers: Sequence[SiteServer] = (),
    ) -> None:
        if not handles:
            raise InvalidArg("a cluster needs at least one site")
        master_data.validate(fam)
        self._master_data = master_data
        self._fam = fam
        self._transport = TransportKind(transport)
        self._settings = settings or ClusterSettings.from_env()
        self._servers = list(servers)

        infos = [handle.info() for handle in handles]
        order = sorted(range(len(handles)), key=lambda i: infos[i].site_id)
        self._handles = [handles[i] for i in order]
        self._infos = [infos[i] for i in order]
        if self._infos[0].site_id != master_data.site_id:
            raise InvalidArg("the master's data must belong to the site with the smallest site_id")
        if len({info.site_id for info in self._infos}) != len(self._infos):
            raise InvalidArg("site ids must be unique")
        p_values = {info.p for info in self._infos}
        if p_values != {master_data.p}:
            raise DimensionMismatch(f"sites disagree on dimension: {sorted(p_values)}")

        self._comm = CommStats()
        self._broadcast = Broadcast()
        self._executor: ThreadPoolExecutor | None = None

    @staticmethod
    def from_sites(
        sites: Sequence[SiteData],
        fam: GlmFamily,
        transport: TransportKind | str = TransportKind.IN_PROCESS,
        settings: ClusterSettings | None = None,
    ) -> Cluster:
        """Build a cluster from local data; sites[0] becomes the master.

        With the socket transport every site is served by a loopback SiteServer
        and reached through a SocketSite connection, exercising the wire format.
        """
        if not sites:
            raise InvalidArg("a cluster needs at least one site")
        kind = TransportKind(transport)
        resolved = settings or ClusterSettings.from_env()
        relabeled = [SiteData(X=site.X, y=site.y, site_id=k) for k, site in enumerate(sites)]
        workers = [SiteWorker(site, fam) for site in relabeled]
        if kind is TransportKind.IN_PROCESS:
            return Cluster(relabeled[0], [InProcessSite(w) for w in workers], fam, kind, resolved)

        servers: list[SiteServer] = []
        handles: list[SiteHandle] = []
        try:
            for worker in workers:
                servers.append(SiteServer(worker).start())
                handles.append(SocketSite(*servers[-1].address, timeout_sec=resolved.socket_timeout_sec))
            return Cluster(relabeled[0], handles, fam, kind, resolved, servers=servers)
        except Exception:
            release_sites(handles, servers)
            raise

    @property
    def fam(self) -> GlmFamily:
        return self._fam

    @property
    def transport(self) -> TransportKind:
        return self._transport

    @property
    def m(self) -> int:
        return len(self._handles)

    @property
    def p(self) -> int:
        return self._master_data.p

    @property
    def site_sizes(self) -> list[int]:
        return [info.n_k for info in self._infos]

    @property
    def n_total(self) -> int:
        return sum(self.site_sizes)

    @property
    def master_n(self) -> int:
        return self._master_data.n

    @property
    def master_data(self) -> SiteData:
        return self._master_data

    @property
    def site_infos(self) -> list[SiteInfo]:
        return list(self._infos)

    @property
    def comm(self) -> CommStats:
        return self._comm.snapshot()

    def global_gradient(self, beta: np.ndarray) -> tuple[np.ndarray, CommStats]:
        """Broadcast beta, aggregate the n_k-weighted site gradients. One round."""
        coef = self._check_beta(beta)
        before = self._comm.snapshot()
        replies = self._fan_out(lambda handle: handle.send_param(coef))
        for info, reply in zip(self._infos, replies, strict=True):
            if reply.shape != (self.p,):
                raise DimensionMismatch(f"site {info.site_id} returned a gradient of shape {reply.shape}")
        if len(replies) == 1:
            total = np.array(replies[0], dtype=float)
        else:
            total = np.zeros(self.p)
            for info, reply in zip(self._infos, replies, strict=True):
                total += info.n_k * reply
            total /= self.n_total
        if not np.all(np.isfinite(total)):
            raise NonFinite("aggregated gradient is not finite")

        vector_bytes = self.m * BYTES_PER_DOUBLE * self.p
        self._comm.record_round(bytes_to_sites=vector_bytes, bytes_from_sites=vector_bytes)
        self._broadcast.beta = coef.copy()
        return total, self._comm.minus(before)

    def master_gradient(self, beta: np.ndarray) -> np.ndarray:
        return gradient(self._fam, self._check_beta(beta), self._master_data)

    def master_hessian(self, beta: np.ndarray, idx: Sequence[int]) -> np.ndarray:
        return hessian(self._fam, self._check_beta(beta), self._master_data, idx)

    def eligible_sites(self, min_site_n: int) -> list[int]:
        return [k for k, info in enumerate(self._infos) if info.n_k >= min_site_n]

    def collect_variance(
        self,
        beta_hat: np.ndarray,
        idx: Sequence[int],
        min_site_n: int | None = None,
    ) -> list[VarianceReply]:
        """Local Hessian and score covariance on idx from every eligible site. One round."""
        index = [int(i) for i in idx]
        threshold = len(index) + 1 if min_site_n is None else min_site_n
        chosen = self._eligible_or_raise(threshold)
        self._ensure_broadcast(beta_hat)

        handles = [self._handles[k] for k in chosen]
        replies = self._fan_out(lambda handle: handle.request_variance(index), handles)
        q = len(index)
        self._comm.record_round(
            bytes_to_sites=len(chosen) * BYTES_PER_DOUBLE * q,
            bytes_from_sites=len(chosen) * (2 * BYTES_PER_DOUBLE * q * q + BYTES_PER_DOUBLE),
        )
        return [
            VarianceReply(site_id=self._infos[k].site_id, n_k=n_k, hessian=j_mat, score_cov=k_mat)
            for k, (n_k, j_mat, k_mat) in zip(chosen, replies, strict=True)
        ]

    def collect_local_statistics(
        self,
        beta_hat: np.ndarray,
        idx: Sequence[int],
        c: np.ndarray,
        g_b: np.ndarray,
        min_site_n: int | None = None,
    ) -> list[LocalStatReply]:
        """Each eligible site returns n_k * ||Omega_k g_b||^2 built from its own data. One round."""
        index = [int(i) for i in idx]
        constraint = np.atleast_2d(np.asarray(c, dtype=float))
        score = np.asarray(g_b, dtype=float)
        if score.shape != (len(index),):
            raise DimensionMismatch(f"g_b has shape {score.shape}, expected ({len(index)},)")
        threshold = len(index) + 1 if min_site_n is None else min_site_n
        chosen = self._eligible_or_raise(threshold)
        self._ensure_broadcast(beta_hat)

        handles = [self._handles[k] for k in chosen]
        replies = self._fan_out(lambda handle: handle.request_local_statistic(index, constraint, score), handles)
        q = len(index)
        r, d = constraint.shape
        request_doubles = 1 + q + 2 + r * d + q
        self._comm.record_round(
            bytes_to_sites=len(chosen) * BYTES_PER_DOUBLE * request_doubles,
            bytes_from_sites=len(chosen) * 2 * BYTES_PER_DOUBLE,
        )
        return [
            LocalStatReply(site_id=self._infos[k].site_id, n_k=n_k, value=value)
            for k, (n_k, value) in zip(chosen, replies, strict=True)
        ]

    def close(self) -> None:
        release_sites(self._handles, self._servers)
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self) -> Cluster:
        return self

    def __exit__(self, *_exc: object) -> None:
        self.close()

    def _check_beta(self, beta: np.ndarray) -> np.ndarray:
        coef = np.asarray(beta, dtype=float)
        if coef.shape != (self.p,):
            raise DimensionMismatch(f"beta has shape {coef.shape}, expected ({self.p},)")
        if not np.all(np.isfinite(coef)):
            raise NonFinite("parameter vector is not finite")
        return coef

    def _eligible_or_raise(self, min_site_n: int) -> list[int]:
        chosen = self.eligible_sites(min_site_n)
        if not chosen:
            raise NoEligibleSites(f"no site has at least {min_site_n} observations")
        excluded = [info.site_id for k, info in enumerate(self._infos) if k not in chosen]
        if excluded:
            logger.warning("sites %s excluded from variance estimation (n_k < %d)", excluded, min_site_n)
        return chosen

    def _ensure_broadcast(self, beta_hat: np.ndarray) -> None:
        # Variance requests are evaluated at the last broadcast parameter.
        coef = self._check_beta(beta_hat)
        if not self._broadcast.matches(coef):
            self.global_gradient(coef)

    def _fan_out(
        self,
        call: Callable[[SiteHandle], _T],
        handles: Sequence[SiteHandle] | None = None,
    ) -> list[_T]:
        targets = list(self._handles if handles is None else handles)
        if len(targets) == 1 or self._settings.site_workers <= 1:
            return [call(handle) for handle in targets]
        if self._executor is None:
            self._executor = ThreadPoolExecutor(
                max_workers=self._settings.site_workers,
                thread_name_prefix="site-round",
            )
        futures = [self._executor.submit(call, handle) for handle in targets]
        return [future.result() for future in futures]


def release_sites(handles: Sequence[SiteHandle], servers: Sequence[SiteServer] = ()) -> None:
    """Close every handle, then stop every server; one failure does not skip the rest."""
    for handle in handles:
        try:
            handle.close()
        except OSError as exc:
            logger.warning("closing site handle failed: %s", exc)
    for server in servers:
        try:
            server.stop()
        except OSError as exc:
            logger.warning("stopping site server failed: %s", exc)
