"""Discreet recordings: per-segment keys split n-of-n among those present.

A new segment starts whenever the set of people in the room changes.  Each
segment gets its own random key, and the key is split into XOR shares, one
per person present.  Every share is needed to decrypt, and any n-1 shares
reveal nothing about the key.  A court escrow pad lets a designated
authority open a segment on its own.

The keystream is SHA-256 in counter mode, which keeps the package on a
single primitive.  Swap in a vetted cipher before relying on this for real
confidentiality.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Protocol, Sequence

from .core import DIGEST_LEN, digest, u64, xor_bytes

KEY_LEN = 32


class Entropy(Protocol):
    def randbytes(self, n: int) -> bytes: ...


class ShareError(ValueError):
    """Reconstruction failed: insufficient or corrupted shares."""


@dataclass(frozen=True)
class SegmentKey:
    key: bytes
    segment_id: int
    checksum: bytes

    @classmethod
    def from_key(cls, key: bytes, segment_id: int) -> "SegmentKey":
        return cls(key, segment_id, key_checksum(key, segment_id))


@dataclass(frozen=True)
class Share:
    participant_id: bytes
    segment_id: int
    value: bytes

    def to_json(self) -> dict:
        return {"participant": self.participant_id.hex(), "segment": self.segment_id,
                "value": self.value.hex()}

    @classmethod
    def from_json(cls, obj: dict) -> "Share":
        return cls(bytes.fromhex(obj["participant"]), int(obj["segment"]),
                   bytes.fromhex(obj["value"]))


@dataclass(frozen=True)
class Segment:
    segment_id: int
    t_start: int
    t_end: Optional[int]
    participants: frozenset


@dataclass(frozen=True)
class AccessRecord:
    segment_id: int
    t_start: int
    t_end: Optional[int]
    participants: tuple  # sorted participant ids
    checksum: bytes
    escrow: bytes

    def to_json(self) -> dict:
        return {
            "segment": self.segment_id,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "participants": [p.hex() for p in self.participants],
            "checksum": self.checksum.hex(),
            "escrow": self.escrow.hex(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AccessRecord":
        return cls(
            segment_id=int(obj["segment"]),
            t_start=int(obj["t_start"]),
            t_end=None if obj["t_end"] is None else int(obj["t_end"]),
            participants=tuple(bytes.fromhex(p) for p in obj["participants"]),
            checksum=bytes.fromhex(obj["checksum"]),
            escrow=bytes.fromhex(obj["escrow"]),
        )


def key_checksum(key: bytes, segment_id: int) -> bytes:
    return digest(key + u64(segment_id))


def gen_segment_key(segment_id: int, entropy: Optional[Entropy] = None) -> SegmentKey:
    entropy = entropy or random.SystemRandom()
    try:
        key = entropy.randbytes(KEY_LEN)
    except (NotImplementedError, OSError) as exc:
        raise RuntimeError("entropy source unavailable") from exc
    return SegmentKey.from_key(key, segment_id)


def keystream(k: SegmentKey, length: int, offset: int = 0) -> bytes:
    first = offset // DIGEST_LEN
    last = (offset + length + DIGEST_LEN - 1) // DIGEST_LEN
    prefix = k.key + u64(k.segment_id)
    stream = b"".join(digest(prefix + u64(i)) for i in range(first, last))
    skip = offset - first * DIGEST_LEN
    return stream[skip:skip + length]


def encrypt_segment(k: SegmentKey, plaintext: bytes, offset: int = 0) -> bytes:
    """XOR with the segment keystream; applying it twice is the identity.

    ``offset`` positions ``plaintext`` within the segment's byte stream so
    consecutive pieces of one segment never reuse keystream.
    """
    if not plaintext:
        return b""
    return xor_bytes(plaintext, keystream(k, len(plaintext), offset))


decrypt_segment = encrypt_segment


def xor_split(secret: bytes, n: int, entropy: Entropy) -> list[bytes]:
    """Split ``secret`` into ``n`` XOR shares; all ``n`` are needed to rebuild it."""
    if n < 1:
        raise ValueError("need at least one share")
    parts = [entropy.randbytes(len(secret)) for _ in range(n - 1)]
    parts.append(xor_bytes(secret, *parts))
    return parts


def split_key(k: SegmentKey, participants: Sequence[bytes],
              entropy: Optional[Entropy] = None) -> list[Share]:
    if not participants:
        raise ValueError("cannot share a key among nobody")
    if len(set(participants)) != len(participants):
        raise ValueError("duplicate participant")
    values = xor_split(k.key, len(participants), entropy or random.SystemRandom())
    return [Share(p, k.segment_id, v) for p, v in zip(participants, values)]


def reconstruct_key(shares: Sequence[Share], expected: AccessRecord) -> SegmentKey:
    if not shares or any(s.segment_id != expected.segment_id for s in shares):
        raise ShareError("insufficient or corrupted shares")
    key = xor_bytes(*(s.value for s in shares))
    if key_checksum(key, expected.segment_id) != expected.checksum:
        raise ShareError("insufficient or corrupted shares")
    return SegmentKey(key, expected.segment_id, expected.checksum)


def _court_pad(court_key: bytes, segment_id: int) -> bytes:
    return digest(court_key + u64(segment_id))


def court_escrow(k: SegmentKey, court_key: bytes) -> bytes:
    return xor_bytes(k.key, _court_pad(court_key, k.segment_id))


def court_open(blob: bytes, segment_id: int, court_key: bytes, checksum: bytes) -> SegmentKey:
    key = xor_bytes(blob, _court_pad(court_key, segment_id))
    if key_checksum(key, segment_id) != checksum:
        raise ShareError("court key does not open this segment")
    return SegmentKey(key, segment_id, checksum)


def segment_session(presence_log: Sequence[tuple[int, Iterable[bytes]]],
                    t_end: Optional[int] = None) -> list[Segment]:
    """Cut the timeline wherever the set of people present changes.

    Each entry ``(t, people)`` says who is present from ``t`` on.  Intervals
    with nobody present produce no segment; nothing may be recorded then.
    """
    if not presence_log:
        raise ValueError("empty presence log")
    entries = [(int(t), frozenset(people)) for t, people in presence_log]
    if any(b[0] < a[0] for a, b in zip(entries, entries[1:])):
        raise ValueError("presence log must be time-sorted")

    # keep the last entry per timestamp, then merge runs of equal sets
    changes: list[tuple[int, frozenset]] = []
    for t, people in entries:
        if changes and changes[-1][0] == t:
            changes[-1] = (t, people)
        elif not changes or changes[-1][1] != people:
            changes.append((t, people))
    merged = [changes[0]]
    for t, people in changes[1:]:
        if people != merged[-1][1]:
            merged.append((t, people))

    segments = []
    for i, (t, people) in enumerate(merged):
        end = merged[i + 1][0] if i + 1 < len(merged) else t_end
        if people and (end is None or end > t):
            segments.append(Segment(len(segments), t, end, people))
    return segments


class DiscreetSession:
    """Keys, shares and access records for one recording session.

    Encryption happens per tick: byte ``j`` of a piece starting at tick
    ``t0`` belongs to tick ``t0 + j // bytes_per_tick`` and is encrypted
    under whichever segment covers that tick.  Ticks outside every segment
    (an empty room) are blanked to zero bytes.
    """

    def __init__(self, presence_log, court_key: bytes, entropy: Optional[Entropy] = None,
                 t_end: Optional[int] = None):
        if len(court_key) != KEY_LEN:
            raise ValueError("court key must be 32 bytes")
        entropy = entropy or random.SystemRandom()
        self.segments = segment_session(presence_log, t_end)
        self.keys: dict[int, SegmentKey] = {}
        self.shares: list[Share] = []
        self.access: list[AccessRecord] = []
        for seg in self.segments:
            k = gen_segment_key(seg.segment_id, entropy)
            people = sorted(seg.participants)
            self.keys[seg.segment_id] = k
            self.shares.extend(split_key(k, people, entropy))
            self.access.append(AccessRecord(seg.segment_id, seg.t_start, seg.t_end,
                                            tuple(people), k.checksum,
                                            court_escrow(k, court_key)))
        self._offsets = {seg.segment_id: 0 for seg in self.segments}

    def segment_at(self, t: int) -> Optional[Segment]:
        for seg in self.segments:
            if seg.t_start <= t and (seg.t_end is None or t < seg.t_end):
                return seg
        return None

    def encrypt_ticks(self, t0: int, data: bytes, bytes_per_tick: int) -> bytes:
        out = bytearray()
        for j in range(0, len(data), bytes_per_tick):
            piece = data[j:j + bytes_per_tick]
            seg = self.segment_at(t0 + j // bytes_per_tick)
            if seg is None:
                out += bytes(len(piece))
                continue
            off = self._offsets[seg.segment_id]
            out += encrypt_segment(self.keys[seg.segment_id], piece, off)
            self._offsets[seg.segment_id] = off + len(piece)
        return bytes(out)

    def shares_for(self, participant_id: bytes) -> list[Share]:
        return [s for s in self.shares if s.participant_id == participant_id]


def decrypt_ticks(pieces: Iterable[tuple[int, bytes]], bytes_per_tick: int,
                  keys: dict[int, SegmentKey], access: Sequence[AccessRecord]) -> bytes:
    """Inverse of :meth:`DiscreetSession.encrypt_ticks` over consecutive pieces.

    Segments whose key is not in ``keys`` come back as zero bytes.
    """
    offsets = {a.segment_id: 0 for a in access}
    out = bytearray()
    for t0, data in pieces:
        for j in range(0, len(data), bytes_per_tick):
            piece = data[j:j + bytes_per_tick]
            t = t0 + j // bytes_per_tick
            rec = next((a for a in access
                        if a.t_start <= t and (a.t_end is None or t < a.t_end)), None)
            if rec is None or rec.segment_id not in keys:
                out += bytes(len(piece))
                if rec is not None:
                    offsets[rec.segment_id] += len(piece)
                continue
            off = offsets[rec.segment_id]
            out += decrypt_segment(keys[rec.segment_id], piece, off)
            offsets[rec.segment_id] = off + len(piece)
    return bytes(out)


def dump_shares(shares: Iterable[Share], fp: IO[str]) -> None:
    for s in shares:
        fp.write(json.dumps(s.to_json(), separators=(",", ":")) + "\n")


def load_shares(fp: IO[str]) -> list[Share]:
    return [Share.from_json(json.loads(line)) for line in fp if line.strip()]
