"""In-process and TCP socket transports between the master and its sites."""

from __future__ import annotations

import logging
import socket
import socketserver
import threading
from typing import Protocol

import numpy as np

from collab_score.cluster import wire
from collab_score.cluster.models import SiteInfo
from collab_score.cluster.wire import MessageTag
from collab_score.cluster.worker import SiteWorker
from collab_score.errors import CollabScoreError, SiteUnreachable

logger = logging.getLogger(__name__)


class SiteHandle(Protocol):
    def info(self) -> SiteInfo: ...

    def send_param(self, beta: np.ndarray) -> np.ndarray: ...

    def request_variance(self, idx: list[int]) -> tuple[int, np.ndarray, np.ndarray]: ...

    def request_local_statistic(
        self, idx: list[int], c: np.ndarray, g_b: np.ndarray
    ) -> tuple[int, float]: ...

    def close(self) -> None: ...


class InProcessSite:
    def __init__(self, worker: SiteWorker) -> None:
        self._worker = worker
        self._info = worker.info()

    def info(self) -> SiteInfo:
        return self._info

    def send_param(self, beta: np.ndarray) -> np.ndarray:
        return self._worker.receive_param(beta)

    def request_variance(self, idx: list[int]) -> tuple[int, np.ndarray, np.ndarray]:
        return self._worker.variance(idx)

    def request_local_statistic(self, idx: list[int], c: np.ndarray, g_b: np.ndarray) -> tuple[int, float]:
        return self._worker.local_statistic(idx, c, g_b)

    def close(self) -> None:
        return None


class SocketSite:
    """Master-side client of one remote site; one TCP connection per site."""

    def __init__(self, host: str, port: int, timeout_sec: float = 30.0) -> None:
        self._address = (host, port)
        try:
            self._sock = socket.create_connection(self._address, timeout=timeout_sec)
        except OSError as exc:
            raise SiteUnreachable(f"cannot connect to site at {host}:{port}: {exc}") from exc
        self._lock = threading.Lock()
        try:
            payload = self._exchange(MessageTag.SITE_INFO_REQUEST, b"", MessageTag.SITE_INFO_REPLY)
            n_k, p, site_id = wire.decode_site_info(payload)
        except Exception:
            self._sock.close()
            raise
        self._info = SiteInfo(site_id=site_id, n_k=n_k, p=p)

    def info(self) -> SiteInfo:
        return self._info

    def send_param(self, beta: np.ndarray) -> np.ndarray:
        payload = self._exchange(MessageTag.PARAM_BROADCAST, wire.encode_vector(beta), MessageTag.GRADIENT_REPLY)
        return wire.decode_vector(payload)

    def request_variance(self, idx: list[int]) -> tuple[int, np.ndarray, np.ndarray]:
        payload = self._exchange(MessageTag.VARIANCE_REQUEST, wire.encode_indices(idx), MessageTag.VARIANCE_REPLY)
        return wire.decode_variance_reply(payload, len(idx))

    def request_local_statistic(self, idx: list[int], c: np.ndarray, g_b: np.ndarray) -> tuple[int, float]:
        payload = self._exchange(
            MessageTag.LOCAL_STAT_REQUEST,
            wire.encode_local_stat_request(idx, c, g_b),
            MessageTag.LOCAL_STAT_REPLY,
        )
        return wire.decode_local_stat_reply(payload)

    def close(self) -> None:
        with self._lock:
            try:
                self._sock.sendall(wire.encode_frame(MessageTag.SHUTDOWN))
            except OSError:
                pass
            self._sock.close()

    def _exchange(self, tag: MessageTag, payload: bytes, expected: MessageTag) -> bytes:
        host, port = self._address
        with self._lock:
            try:
                self._sock.sendall(wire.encode_frame(tag, payload))
                reply_tag, reply = wire.read_frame(self._sock)
            except OSError as exc:
                raise SiteUnreachable(f"site at {host}:{port} failed during {tag.name}: {exc}") from exc
        if reply_tag is MessageTag.ERROR_REPLY:
            raise wire.decode_error(reply)
        if reply_tag is not expected:
            raise SiteUnreachable(f"site at {host}:{port} answered {reply_tag.name} to {tag.name}")
        return reply


class _SiteRequestHandler(socketserver.StreamRequestHandler):
    server: _SiteTCPServer

    def handle(self) -> None:
        worker = self.server.worker
        while True:
            try:
                tag, payload = wire.read_frame(self.rfile)
            except SiteUnreachable:
                return
            if tag is MessageTag.SHUTDOWN:
                return
            try:
                reply_tag, reply = _dispatch(worker, tag, payload)
            except Exception as exc:
                logger.warning("site %d failed %s: %s", worker.info().site_id, tag.name, exc)
                reply_tag, reply = MessageTag.ERROR_REPLY, wire.encode_error(exc)
            self.wfile.write(wire.encode_frame(reply_tag, reply))
            self.wfile.flush()


def _dispatch(worker: SiteWorker, tag: MessageTag, payload: bytes) -> tuple[MessageTag, bytes]:
    if tag is MessageTag.SITE_INFO_REQUEST:
        info = worker.info()
        return MessageTag.SITE_INFO_REPLY, wire.encode_site_info(info.n_k, info.p, info.site_id)
    if tag is MessageTag.PARAM_BROADCAST:
        grad = worker.receive_param(wire.decode_vector(payload))
        return MessageTag.GRADIENT_REPLY, wire.encode_vector(grad)
    if tag is MessageTag.VARIANCE_REQUEST:
        n_k, j_mat, k_mat = worker.variance(wire.decode_indices(payload))
        return MessageTag.VARIANCE_REPLY, wire.encode_variance_reply(n_k, j_mat, k_mat)
    if tag is MessageTag.LOCAL_STAT_REQUEST:
        idx, c, g_b = wire.decode_local_stat_request(payload)
        n_k, value = worker.local_statistic(idx, c, g_b)
        return MessageTag.LOCAL_STAT_REPLY, wire.encode_local_stat_reply(n_k, value)
    raise CollabScoreError(f"site cannot handle message {tag.name}")


class _SiteTCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], worker: SiteWorker) -> None:
        self.worker = worker
        super().__init__(address, _SiteRequestHandler)


class SiteServer:
    """Serves one SiteWorker over TCP until shut down."""

    def __init__(self, worker: SiteWorker, host: str = "127.0.0.1", port: int = 0) -> None:
        self._server = _SiteTCPServer((host, port), worker)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return str(host), int(port)

    def start(self) -> SiteServer:
        self._thread = threading.Thread(target=self._server.serve_forever, name="site-server", daemon=True)
        self._thread.start()
        logger.info("site server listening on %s:%d", *self.address)
        return self

    def serve_forever(self) -> None:
        logger.info("site server listening on %s:%d", *self.address)
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
