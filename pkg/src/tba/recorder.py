"""Recording pipeline: bind challenges, chunk, chain and publish.

For every chunk interval the recorder takes the combined beacon challenge,
stamps markers derived from it into the payload, appends the chunk to a
hash chain, and submits the new chain head to every repository.  Once a
chunk is published the manifest needs no further protection.

Physical scene illumination is replaced by marker embedding.  Markers are
a pure function of (challenge, chunk index, position), so a verifier can
recompute them exactly.
"""

from __future__ import annotations

import base64
import json
import logging
import random
import struct
import warnings
from dataclasses import dataclass, field
from typing import IO, Callable, Mapping, Optional, Sequence

from .beacon import Archive
from .combiner import Challenge, NoTrustworthyChallenge, challenge_of_record
from .core import (DIGEST_LEN, FRAME_VERSION, ID_LEN, ChainHead, Chunk, FramingError,
                   canonical_chunk_bytes, chain_extend, digest, u64)
from .discretion import AccessRecord, DiscreetSession
from .repository import HapLog, HapRecord, hap_submit, prepare_submission

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


class DegenerateChunkWarning(UserWarning):
    """Payload too short to carry a single marker."""


class EmptyWindowWarning(UserWarning):
    """Coupling digest computed over an empty secondary window."""


@dataclass(frozen=True)
class SessionConfig:
    session_id: bytes
    start_time: int
    chunk_period: int
    beacon_ids: tuple = ()
    repository_ids: tuple = ()
    marker_stride: int = 64
    marker_len: int = 8
    bytes_per_tick: int = 40
    secondary_per_tick: int = 8
    coupling_enabled: bool = False
    encrypted: bool = False

    def __post_init__(self):
        if len(self.session_id) != ID_LEN:
            raise ValueError("session_id must be 16 bytes")
        if self.chunk_period < 1:
            raise ValueError("chunk_period must be at least 1")
        if not 0 < self.marker_len <= DIGEST_LEN:
            raise ValueError("marker_len must be in 1..32")
        if self.marker_stride <= self.marker_len:
            raise ValueError("marker_stride must exceed marker_len")
        if self.bytes_per_tick < 1 or self.secondary_per_tick < 0:
            raise ValueError("bad per-tick byte counts")
        for bid in (*self.beacon_ids, *self.repository_ids):
            if len(bid) != ID_LEN:
                raise ValueError("beacon and repository ids must be 16 bytes")

    def header_bytes(self) -> bytes:
        """Canonical header frame; its digest seeds the chain."""
        flags = (1 if self.coupling_enabled else 0) | (2 if self.encrypted else 0)
        parts = [
            struct.pack(">B4s16sQQIIIIB", FRAME_VERSION, b"TBAH", self.session_id,
                        self.start_time, self.chunk_period, self.marker_stride,
                        self.marker_len, self.bytes_per_tick, self.secondary_per_tick, flags),
            struct.pack(">I", len(self.beacon_ids)), *self.beacon_ids,
            struct.pack(">I", len(self.repository_ids)), *self.repository_ids,
        ]
        return b"".join(parts)

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id.hex(),
            "start_time": self.start_time,
            "chunk_period": self.chunk_period,
            "beacon_ids": [b.hex() for b in self.beacon_ids],
            "repository_ids": [r.hex() for r in self.repository_ids],
            "marker_stride": self.marker_stride,
            "marker_len": self.marker_len,
            "bytes_per_tick": self.bytes_per_tick,
            "secondary_per_tick": self.secondary_per_tick,
            "coupling_enabled": self.coupling_enabled,
            "encrypted": self.encrypted,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SessionConfig":
        return cls(
            session_id=bytes.fromhex(obj["session_id"]),
            start_time=int(obj["start_time"]),
            chunk_period=int(obj["chunk_period"]),
            beacon_ids=tuple(bytes.fromhex(b) for b in obj["beacon_ids"]),
            repository_ids=tuple(bytes.fromhex(r) for r in obj["repository_ids"]),
            marker_stride=int(obj["marker_stride"]),
            marker_len=int(obj["marker_len"]),
            bytes_per_tick=int(obj["bytes_per_tick"]),
            secondary_per_tick=int(obj["secondary_per_tick"]),
            coupling_enabled=bool(obj["coupling_enabled"]),
            encrypted=bool(obj["encrypted"]),
        )


class SceneSource:
    """Stand-in camera: seeded synthetic bytes, or raw bytes from a file."""

    def __init__(self, fp: Optional[IO[bytes]] = None, seed: Optional[int] = None):
        if (fp is None) == (seed is None):
            raise ValueError("give exactly one of fp or seed")
        self.mode = "file" if fp is not None else "seeded-synthetic"
        self._fp = fp
        self._rng = None if seed is None else random.Random(seed)

    @classmethod
    def seeded(cls, seed: int) -> "SceneSource":
        return cls(seed=seed)

    @classmethod
    def from_file(cls, path) -> "SceneSource":
        return cls(fp=open(path, "rb"))

    def read(self, n: int) -> bytes:
        if self._rng is not None:
            return self._rng.randbytes(n)
        return self._fp.read(n)

    def close(self) -> None:
        if self._fp is not None:
            self._fp.close()


def pad_challenge(value: bytes) -> bytes:
    if len(value) > DIGEST_LEN:
        raise FramingError("challenge wider than 256 bits")
    return bytes(value) + bytes(DIGEST_LEN - len(value))


def marker(challenge: bytes, index: int, j: int, length: int) -> bytes:
    return digest(challenge + u64(index) + u64(j))[:length]


def marker_offsets(payload_len: int, stride: int, length: int) -> range:
    if payload_len < length:
        return range(0)
    return range(0, (payload_len - length) // stride + 1)


def bind_challenge(payload: bytes, challenge: bytes, index: int, cfg: SessionConfig) -> bytes:
    """Overwrite every ``marker_stride`` bytes with a challenge-derived marker."""
    if not payload:
        raise ValueError("cannot bind a challenge into an empty payload")
    if len(payload) < cfg.marker_len:
        warnings.warn(f"chunk {index}: payload shorter than one marker", DegenerateChunkWarning)
        return bytes(payload)
    out = bytearray(payload)
    for j in marker_offsets(len(out), cfg.marker_stride, cfg.marker_len):
        pos = j * cfg.marker_stride
        out[pos:pos + cfg.marker_len] = marker(challenge, index, j, cfg.marker_len)
    return bytes(out)


def couple_modalities(secondary_window: bytes) -> bytes:
    if not secondary_window:
        warnings.warn("coupling over an empty secondary window", EmptyWindowWarning)
    return digest(secondary_window)


@dataclass
class Recording:
    config: SessionConfig
    chunks: list = field(default_factory=list)
    chain: list = field(default_factory=list)
    receipts: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    access: list = field(default_factory=list)

    def genesis(self) -> ChainHead:
        return ChainHead(0, digest(self.config.header_bytes()))

    def to_json(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "header": self.config.to_json(),
            "chunks": [
                {
                    "index": c.index,
                    "t_start": c.t_start,
                    "t_end": c.t_end,
                    "challenge_time": c.challenge_time,
                    "challenge": c.challenge.hex(),
                    "payload": base64.b64encode(c.payload).decode("ascii"),
                    "coupling": None if c.coupling_digest is None else c.coupling_digest.hex(),
                }
                for c in self.chunks
            ],
            "chain": [h.digest.hex() for h in self.chain],
            "receipts": [[None if r is None else r.to_json() for r in row] for row in self.receipts],
            "gaps": list(self.gaps),
            "access": [a.to_json() for a in self.access],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Recording":
        if obj.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {obj.get('version')!r}")
        chunks = [
            Chunk(
                index=int(c["index"]),
                t_start=int(c["t_start"]),
                t_end=int(c["t_end"]),
                challenge_time=int(c["challenge_time"]),
                challenge=bytes.fromhex(c["challenge"]),
                payload=base64.b64decode(c["payload"], validate=True),
                coupling_digest=None if c["coupling"] is None else bytes.fromhex(c["coupling"]),
            )
            for c in obj["chunks"]
        ]
        return cls(
            config=SessionConfig.from_json(obj["header"]),
            chunks=chunks,
            chain=[ChainHead(i + 1, bytes.fromhex(h)) for i, h in enumerate(obj["chain"])],
            receipts=[[None if r is None else HapRecord.from_json(r) for r in row]
                      for row in obj["receipts"]],
            gaps=[dict(g) for g in obj["gaps"]],
            access=[AccessRecord.from_json(a) for a in obj.get("access", [])],
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def loads(cls, text: str) -> "Recording":
        return cls.from_json(json.loads(text))


SubmitFn = Callable[[bytes, int], list]


class Recorder:
    """One recording session, advanced chunk by chunk.

    ``submit(s, t)`` publishes a submission to every repository and returns
    one receipt (or None) per repository.  The default submits directly to
    ``repositories``.  A simulator can substitute a delayed transport and
    fill receipts later with :meth:`note_receipt`.
    """

    def __init__(self, cfg: SessionConfig, repositories: Sequence[HapLog] = (),
                 submit: Optional[SubmitFn] = None, sealer: Optional[DiscreetSession] = None):
        if sealer is not None and not cfg.encrypted:
            raise ValueError("a sealer requires an encrypted session config")
        self.cfg = cfg
        self.repositories = list(repositories)
        self._submit = submit or self._submit_direct
        self.sealer = sealer
        self.recording = Recording(cfg)
        self.head = self.recording.genesis()
        self._next_t = cfg.start_time
        self._finalized = False

    def _submit_direct(self, s: bytes, t: int) -> list:
        return [hap_submit(r, s, t) for r in self.repositories]

    def _interval(self, t_start: Optional[int]) -> tuple[int, int]:
        if self._finalized:
            raise RuntimeError("session already finalized")
        t_start = self._next_t if t_start is None else t_start
        if t_start < self._next_t:
            raise ValueError(f"chunk at {t_start} overlaps previous chunk")
        return t_start, t_start + self.cfg.chunk_period

    def _read(self, scene: SceneSource, secondary: Optional[SceneSource]) -> tuple[bytes, bytes]:
        raw = scene.read(self.cfg.chunk_period * self.cfg.bytes_per_tick)
        window = b""
        if secondary is not None:
            window = secondary.read(self.cfg.chunk_period * self.cfg.secondary_per_tick)
        return raw, window

    def record_chunk(self, scene: SceneSource, challenge: Challenge,
                     t_start: Optional[int] = None, secondary: Optional[SceneSource] = None):
        """Record one chunk bound to ``challenge``; returns (chunk, head, receipts)."""
        t_start, t_end = self._interval(t_start)
        if not t_start <= challenge.t <= t_end:
            raise ValueError(f"challenge from t={challenge.t} is outside [{t_start}, {t_end}]")
        if self.cfg.coupling_enabled and secondary is None:
            raise ValueError("coupling enabled but no secondary stream given")
        raw, window = self._read(scene, secondary)
        if self.sealer is not None:
            raw = self.sealer.encrypt_ticks(t_start, raw, self.cfg.bytes_per_tick)
        index = len(self.recording.chunks)
        chal = pad_challenge(challenge.value)
        chunk = Chunk(
            index=index,
            t_start=t_start,
            t_end=t_end,
            challenge_time=challenge.t,
            challenge=chal,
            payload=bind_challenge(raw, chal, index, self.cfg),
            coupling_digest=couple_modalities(window) if self.cfg.coupling_enabled else None,
        )
        self.head = chain_extend(self.head, canonical_chunk_bytes(chunk, self.cfg.session_id))
        receipts = list(self._submit(prepare_submission(self.head.digest), t_end))
        self.recording.chunks.append(chunk)
        self.recording.chain.append(self.head)
        self.recording.receipts.append(receipts)
        self._next_t = t_end
        return chunk, self.head, receipts

    def record_gap(self, reason: str, t_start: Optional[int] = None,
                   scene: Optional[SceneSource] = None,
                   secondary: Optional[SceneSource] = None) -> dict:
        """Skip an interval; the scene bytes for it are consumed and discarded."""
        t_start, t_end = self._interval(t_start)
        if scene is not None:
            self._read(scene, secondary)
        gap = {"t_start": t_start, "t_end": t_end, "reason": reason}
        self.recording.gaps.append(gap)
        self._next_t = t_end
        log.warning("gap [%d, %d): %s", t_start, t_end, reason)
        return gap

    def record_from_archives(self, scene: SceneSource, archives: Mapping[bytes, Archive],
                             t_start: Optional[int] = None,
                             secondary: Optional[SceneSource] = None):
        """Pull the challenge at the chunk's first tick; gap if none is trustworthy."""
        t_start = self._next_t if t_start is None else t_start
        try:
            challenge = challenge_of_record(t_start, archives)
        except NoTrustworthyChallenge as exc:
            return self.record_gap(str(exc), t_start, scene, secondary)
        return self.record_chunk(scene, challenge, t_start, secondary)

    def note_receipt(self, index: int, repo: int, record: Optional[HapRecord]) -> None:
        self.recording.receipts[index][repo] = record

    def finalize(self) -> Recording:
        if not self.recording.chunks:
            raise RuntimeError("cannot finalize a session with no chunks")
        self._finalized = True
        if self.sealer is not None:
            self.recording.access = list(self.sealer.access)
        return self.recording
