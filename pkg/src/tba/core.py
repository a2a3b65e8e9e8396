"""Hashing, canonical chunk framing and hash chaining.

Everything else in the package hashes only the byte strings produced here,
so the layouts below are bit-exact and must not change without bumping
``FRAME_VERSION``.
"""

from __future__ import annotations

import hashlib
import struct
import time
from dataclasses import dataclass
from typing import Optional

DIGEST_LEN = 32
ID_LEN = 16
FRAME_VERSION = 0x01
U64_MAX = 2**64 - 1
U32_MAX = 2**32 - 1

ZERO_DIGEST = bytes(DIGEST_LEN)

# version, session_id, index, t_start, t_end, challenge_time, challenge, coupling, payload_len
_CHUNK_HEAD = struct.Struct(">B16sQQQQ32s32sI")
CHUNK_OVERHEAD = _CHUNK_HEAD.size  # 117


class FramingError(ValueError):
    """Raised when a value cannot be represented in a canonical frame."""


def digest(data: bytes) -> bytes:
    """SHA-256 of ``data``."""
    return hashlib.sha256(data).digest()


def check_digest(value: bytes, what: str = "digest") -> bytes:
    if not isinstance(value, (bytes, bytearray)) or len(value) != DIGEST_LEN:
        raise ValueError(f"{what} must be exactly {DIGEST_LEN} bytes")
    return bytes(value)


def truncate_hex64(d: bytes) -> str:
    """Lowercase hex of the first 8 bytes of a digest (a 64-bit short hash)."""
    return check_digest(d)[:8].hex()


def make_id(label: str) -> bytes:
    """Derive a stable 16-byte identifier from a human-readable label."""
    return digest(label.encode("utf-8"))[:ID_LEN]


def xor_bytes(*parts: bytes) -> bytes:
    if not parts:
        raise ValueError("xor of nothing")
    n = len(parts[0])
    if any(len(p) != n for p in parts):
        raise ValueError("xor operands differ in length")
    acc = int.from_bytes(parts[0], "big")
    for p in parts[1:]:
        acc ^= int.from_bytes(p, "big")
    return acc.to_bytes(n, "big")


def u64(value: int) -> bytes:
    if not 0 <= value <= U64_MAX:
        raise FramingError(f"{value} does not fit in u64")
    return value.to_bytes(8, "big")


def now_ms() -> int:
    """Real-mode timestamp: milliseconds since the Unix epoch."""
    return time.time_ns() // 1_000_000


@dataclass(frozen=True)
class ChainHead:
    index: int
    digest: bytes

    def __post_init__(self):
        check_digest(self.digest, "chain head digest")


def chain_extend(head: ChainHead, chunk_bytes: bytes) -> ChainHead:
    return ChainHead(head.index + 1, digest(head.digest + chunk_bytes))


@dataclass(frozen=True)
class Chunk:
    """One challenge-bound slice of the recorded stream."""

    index: int
    t_start: int
    t_end: int
    challenge_time: int
    challenge: bytes
    payload: bytes
    coupling_digest: Optional[bytes] = None


def canonical_chunk_bytes(chunk: Chunk, session_id: bytes) -> bytes:
    if len(session_id) != ID_LEN:
        raise FramingError("session_id must be 16 bytes")
    if len(chunk.challenge) != DIGEST_LEN:
        raise FramingError("challenge field must be 32 bytes")
    if len(chunk.payload) > U32_MAX:
        raise FramingError("payload longer than 2^32-1 bytes")
    coupling = ZERO_DIGEST if chunk.coupling_digest is None else chunk.coupling_digest
    if len(coupling) != DIGEST_LEN:
        raise FramingError("coupling digest must be 32 bytes")
    for name in ("index", "t_start", "t_end", "challenge_time"):
        value = getattr(chunk, name)
        if not 0 <= value <= U64_MAX:
            raise FramingError(f"{name}={value} does not fit in u64")
    head = _CHUNK_HEAD.pack(
        FRAME_VERSION,
        session_id,
        chunk.index,
        chunk.t_start,
        chunk.t_end,
        chunk.challenge_time,
        chunk.challenge,
        coupling,
        len(chunk.payload),
    )
    return head + bytes(chunk.payload)


def parse_chunk_bytes(frame: bytes) -> tuple[bytes, Chunk]:
    """Inverse of :func:`canonical_chunk_bytes`; returns ``(session_id, chunk)``.

    An all-zero coupling field decodes as "absent".
    """
    if len(frame) < CHUNK_OVERHEAD:
        raise FramingError("frame shorter than fixed header")
    (version, session_id, index, t_start, t_end, challenge_time, challenge,
     coupling, length) = _CHUNK_HEAD.unpack_from(frame)
    if version != FRAME_VERSION:
        raise FramingError(f"unknown frame version {version}")
    payload = frame[CHUNK_OVERHEAD:]
    if len(payload) != length:
        raise FramingError("payload length field does not match frame")
    chunk = Chunk(
        index=index,
        t_start=t_start,
        t_end=t_end,
        challenge_time=challenge_time,
        challenge=challenge,
        payload=payload,
        coupling_digest=None if coupling == ZERO_DIGEST else coupling,
    )
    return session_id, chunk
