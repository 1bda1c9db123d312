"""Fixed-width little-endian framing for the socket transport.

Frame: [1-byte tag][8-byte LE unsigned payload length][payload].
A site that fails a request answers with ERROR_REPLY: the UTF-8 error class
name, a NUL byte, then the UTF-8 message.
"""

from __future__ import annotations

import socket
import struct
from enum import IntEnum
from typing import BinaryIO

import numpy as np

from collab_score import errors
from collab_score.errors import CollabScoreError, DimensionMismatch, NumericalError, SiteUnreachable

_HEADER = struct.Struct("<BQ")
_U64 = struct.Struct("<Q")
_F64 = "<f8"
_U64_ARRAY = "<u8"


class MessageTag(IntEnum):
    PARAM_BROADCAST = 0x01
    GRADIENT_REPLY = 0x02
    VARIANCE_REQUEST = 0x03
    VARIANCE_REPLY = 0x04
    SHUTDOWN = 0x05
    SITE_INFO_REQUEST = 0x06
    SITE_INFO_REPLY = 0x07
    LOCAL_STAT_REQUEST = 0x08
    LOCAL_STAT_REPLY = 0x09
    ERROR_REPLY = 0x0A


def encode_frame(tag: MessageTag, payload: bytes = b"") -> bytes:
    return _HEADER.pack(int(tag), len(payload)) + payload


def _recv_exact(stream: socket.socket | BinaryIO, length: int) -> bytes:
    chunks: list[bytes] = []
    remaining = length
    while remaining > 0:
        if isinstance(stream, socket.socket):
            chunk = stream.recv(min(remaining, 1 << 20))
        else:
            chunk = stream.read(remaining)
        if not chunk:
            raise SiteUnreachable("peer closed the connection mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(stream: socket.socket | BinaryIO) -> tuple[MessageTag, bytes]:
    tag_raw, length = _HEADER.unpack(_recv_exact(stream, _HEADER.size))
    try:
        tag = MessageTag(tag_raw)
    except ValueError as exc:
        raise SiteUnreachable(f"unknown message tag 0x{tag_raw:02x}") from exc
    return tag, _recv_exact(stream, length) if length else b""


def encode_vector(values: np.ndarray) -> bytes:
    """8-byte count followed by the doubles."""
    vec = np.ascontiguousarray(values, dtype=_F64).reshape(-1)
    return _U64.pack(vec.shape[0]) + vec.tobytes()


def decode_vector(payload: bytes) -> np.ndarray:
    (count,) = _U64.unpack_from(payload, 0)
    if len(payload) != _U64.size + 8 * count:
        raise DimensionMismatch(f"vector frame declares {count} doubles but carries {len(payload) - 8} bytes")
    return np.frombuffer(payload, dtype=_F64, count=count, offset=_U64.size).astype(float)


def encode_indices(idx: list[int] | tuple[int, ...]) -> bytes:
    return np.asarray(idx, dtype=_U64_ARRAY).tobytes()


def decode_indices(payload: bytes) -> list[int]:
    if len(payload) % 8:
        raise DimensionMismatch("index payload length is not a multiple of 8")
    return [int(i) for i in np.frombuffer(payload, dtype=_U64_ARRAY)]


def encode_variance_reply(n_k: int, j_mat: np.ndarray, k_mat: np.ndarray) -> bytes:
    return (
        _U64.pack(n_k)
        + np.ascontiguousarray(j_mat, dtype=_F64).tobytes()
        + np.ascontiguousarray(k_mat, dtype=_F64).tobytes()
    )


def decode_variance_reply(payload: bytes, q: int) -> tuple[int, np.ndarray, np.ndarray]:
    expected = _U64.size + 2 * 8 * q * q
    if len(payload) != expected:
        raise DimensionMismatch(f"variance reply carries {len(payload)} bytes, expected {expected}")
    (n_k,) = _U64.unpack_from(payload, 0)
    block = np.frombuffer(payload, dtype=_F64, offset=_U64.size).astype(float)
    return int(n_k), block[: q * q].reshape(q, q), block[q * q :].reshape(q, q)


def encode_site_info(n_k: int, p: int, site_id: int) -> bytes:
    return _U64.pack(n_k) + _U64.pack(p) + _U64.pack(site_id)


def decode_site_info(payload: bytes) -> tuple[int, int, int]:
    n_k, p, site_id = struct.unpack("<QQQ", payload)
    return int(n_k), int(p), int(site_id)


def encode_local_stat_request(idx: list[int], c: np.ndarray, g_b: np.ndarray) -> bytes:
    constraint = np.atleast_2d(np.asarray(c, dtype=float))
    r, d = constraint.shape
    return (
        _U64.pack(len(idx))
        + encode_indices(idx)
        + _U64.pack(r)
        + _U64.pack(d)
        + np.ascontiguousarray(constraint, dtype=_F64).tobytes()
        + np.ascontiguousarray(g_b, dtype=_F64).tobytes()
    )


def decode_local_stat_request(payload: bytes) -> tuple[list[int], np.ndarray, np.ndarray]:
    offset = 0
    (q,) = _U64.unpack_from(payload, offset)
    offset += 8
    idx = decode_indices(payload[offset : offset + 8 * q])
    offset += 8 * q
    r, d = struct.unpack_from("<QQ", payload, offset)
    offset += 16
    c = np.frombuffer(payload, dtype=_F64, count=r * d, offset=offset).astype(float).reshape(r, d)
    offset += 8 * r * d
    g_b = np.frombuffer(payload, dtype=_F64, count=q, offset=offset).astype(float)
    if offset + 8 * q != len(payload):
        raise DimensionMismatch("local statistic request has trailing bytes")
    return idx, c, g_b


def encode_local_stat_reply(n_k: int, value: float) -> bytes:
    return _U64.pack(n_k) + struct.pack("<d", value)


def decode_local_stat_reply(payload: bytes) -> tuple[int, float]:
    n_k, value = struct.unpack("<Qd", payload)
    return int(n_k), float(value)


def _error_classes() -> dict[str, type[CollabScoreError]]:
    return {
        name: cls
        for name, cls in vars(errors).items()
        if isinstance(cls, type) and issubclass(cls, CollabScoreError)
    }


def encode_error(exc: BaseException) -> bytes:
    """Package errors keep their class; numpy linear-algebra failures travel as NumericalError."""
    if isinstance(exc, CollabScoreError):
        name, message = type(exc).__name__, str(exc)
    elif isinstance(exc, (np.linalg.LinAlgError, ArithmeticError)):
        name, message = NumericalError.__name__, f"{type(exc).__name__}: {exc}"
    else:
        name, message = CollabScoreError.__name__, f"{type(exc).__name__}: {exc}"
    return name.encode("utf-8") + b"\0" + message.encode("utf-8")


def decode_error(payload: bytes) -> CollabScoreError:
    name, sep, message = payload.partition(b"\0")
    if not sep:
        raise SiteUnreachable("malformed error frame")
    cls = _error_classes().get(name.decode("utf-8", errors="replace"), CollabScoreError)
    return cls(message.decode("utf-8", errors="replace"))
