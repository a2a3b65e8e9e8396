"""Reconstruct each chunk's time bracket and look for tampering.

The past bracket comes from the beacon archives: a chunk's markers depend
on a challenge nobody could know before ``challenge_time``.  The future
bracket comes from the repositories: the earliest tick at which a strict
majority of logs held the published value for the chunk's chain head.

Missing public data makes a chunk *unverifiable*, never *tampered*.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .beacon import Archive
from .combiner import InsufficientArchive, NoTrustworthyChallenge, challenge_of_record
from .core import canonical_chunk_bytes, chain_extend, digest
from .recorder import Recording, marker, marker_offsets, pad_challenge
from .repository import HapLog, majority_time, prepare_submission

PASS, FAIL, DEGRADED, NOT_APPLICABLE = "pass", "fail", "degraded", "not-applicable"
AUTHENTIC, TAMPERED, UNVERIFIABLE = "authentic", "tampered", "unverifiable"
EXIT_CODES = {AUTHENTIC: 0, TAMPERED: 1, UNVERIFIABLE: 2}

MAJORITY_NOTE = ("future bracket uses the earliest tick at which a strict majority "
                 "(> m/2) of configured repositories published the value")


@dataclass(frozen=True)
class Finding:
    index: int
    check: str
    status: str
    detail: str = ""
    t: Optional[int] = None

    def to_json(self) -> dict:
        out = {"index": self.index, "check": self.check, "status": self.status}
        if self.detail:
            out["detail"] = self.detail
        if self.t is not None:
            out["t"] = self.t
        return out


@dataclass(frozen=True)
class TimeBracket:
    chunk_index: int
    t_past: int
    t_future: int

    @property
    def width(self) -> int:
        return self.t_future - self.t_past

    def to_json(self) -> dict:
        return {"chunk": self.chunk_index, "t_past": self.t_past,
                "t_future": self.t_future, "width": self.width}


@dataclass
class Report:
    verdict: str
    findings: list = field(default_factory=list)
    brackets: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def max_width(self) -> Optional[int]:
        return max((b.width for b in self.brackets), default=None)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def failures(self) -> list:
        return [f for f in self.findings if f.status == FAIL]

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "max_width": self.max_width,
            "brackets": [b.to_json() for b in self.brackets],
            "findings": [f.to_json() for f in self.findings if f.status != PASS],
            "checked": len(self.findings),
            "notes": list(self.notes),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


def recompute_chain(rec: Recording) -> list:
    head = rec.genesis()
    heads = []
    for chunk in rec.chunks:
        head = chain_extend(head, canonical_chunk_bytes(chunk, rec.config.session_id))
        heads.append(head)
    return heads


def verify_chain(rec: Recording) -> Optional[int]:
    """None when the stored chain matches; otherwise the first bad position.

    A stored chain longer or shorter than the chunk list fails at the
    first position where one side is missing.
    """
    heads = recompute_chain(rec)
    for i, (ours, stored) in enumerate(zip(heads, rec.chain)):
        if ours.digest != stored.digest:
            return i
    for i, chunk in enumerate(rec.chunks):
        if chunk.index != i:
            return i
    if len(heads) != len(rec.chain):
        return min(len(heads), len(rec.chain))
    return None


def _check_markers(rec: Recording, i: int) -> bool:
    chunk, cfg = rec.chunks[i], rec.config
    for j in marker_offsets(len(chunk.payload), cfg.marker_stride, cfg.marker_len):
        pos = j * cfg.marker_stride
        if chunk.payload[pos:pos + cfg.marker_len] != marker(chunk.challenge, chunk.index, j,
                                                               cfg.marker_len):
            return False
    return True


def verify_past(rec: Recording, archives: Mapping[bytes, Archive]) -> list:
    findings = []
    wanted = rec.config.beacon_ids or tuple(sorted(archives))
    missing = [b for b in wanted if b not in archives]
    chosen = {b: archives[b] for b in wanted if b in archives}
    for i, chunk in enumerate(rec.chunks):
        t = chunk.challenge_time
        if not chunk.t_start <= t <= chunk.t_end:
            findings.append(Finding(i, "past", FAIL, "challenge time outside chunk interval"))
            continue
        if not _check_markers(rec, i):
            findings.append(Finding(i, "past", FAIL, "markers do not match stored challenge"))
            continue
        if missing or not chosen:
            findings.append(Finding(i, "past", DEGRADED, "beacon archive unavailable"))
            continue
        try:
            challenge = challenge_of_record(t, chosen)
        except InsufficientArchive as exc:
            findings.append(Finding(i, "past", DEGRADED, str(exc)))
            continue
        except NoTrustworthyChallenge:
            findings.append(Finding(i, "past", FAIL, "no trustworthy challenge at that tick"))
            continue
        if pad_challenge(challenge.value) != chunk.challenge:
            findings.append(Finding(i, "past", FAIL, "challenge differs from beacon record"))
            continue
        findings.append(Finding(i, "past", PASS, t=t))
    return findings


def verify_future(rec: Recording, logs: Sequence[HapLog]) -> list:
    """Majority publication time of every recomputed chain head.

    The quorum is a strict majority of the repositories named in the
    session config.  If a configured log is unavailable and the ones at
    hand fall short of that quorum, the chunk is degraded, not failed.
    """
    findings = []
    heads = recompute_chain(rec)
    configured = set(rec.config.repository_ids)
    present = {lg.hap_id for lg in logs}
    m = len(configured | present) if configured else len(logs)
    missing = len(configured - present)
    if not logs:
        return [Finding(i, "future", DEGRADED, "no repository logs") for i in range(len(heads))]
    for i, head in enumerate(heads):
        s = prepare_submission(head.digest)
        t = majority_time(logs, s, m)
        held = sum(lg.lookup(digest(s)) is not None for lg in logs)
        if t is None and held + missing > m // 2:
            findings.append(Finding(i, "future", DEGRADED,
                                    f"{missing} of {m} repository logs unavailable"))
        elif t is None:
            findings.append(Finding(i, "future", FAIL, "chain head never held by a majority"))
        elif t < rec.chunks[i].challenge_time:
            findings.append(Finding(i, "future", FAIL, "published before its challenge existed"))
        else:
            findings.append(Finding(i, "future", PASS, t=t))
    if len(rec.chain) != len(heads):
        findings.append(Finding(min(len(rec.chain), len(heads)), "future", FAIL,
                                f"manifest lists {len(rec.chain)} published digests "
                                f"for {len(heads)} chunks"))
    return findings


def secondary_window(rec: Recording, i: int, track: bytes) -> bytes:
    cfg, chunk = rec.config, rec.chunks[i]
    lo = (chunk.t_start - cfg.start_time) * cfg.secondary_per_tick
    hi = (chunk.t_end - cfg.start_time) * cfg.secondary_per_tick
    return track[lo:hi]


def verify_coupling(rec: Recording, secondary_track: Optional[bytes]) -> list:
    if not rec.config.coupling_enabled:
        return [Finding(i, "coupling", NOT_APPLICABLE) for i in range(len(rec.chunks))]
    findings = []
    for i, chunk in enumerate(rec.chunks):
        if chunk.coupling_digest is None:
            findings.append(Finding(i, "coupling", FAIL, "coupling digest missing"))
        elif secondary_track is None:
            findings.append(Finding(i, "coupling", DEGRADED, "secondary track unavailable"))
        elif digest(secondary_window(rec, i, secondary_track)) != chunk.coupling_digest:
            findings.append(Finding(i, "coupling", FAIL, "secondary track does not match"))
        else:
            findings.append(Finding(i, "coupling", PASS))
    return findings


def bracket_report(rec: Recording, archives: Mapping[bytes, Archive],
                   logs: Sequence[HapLog], secondary_track: Optional[bytes] = None) -> Report:
    findings = []
    bad = verify_chain(rec)
    findings.append(Finding(-1 if bad is None else bad, "chain",
                            PASS if bad is None else FAIL,
                            "" if bad is None else "stored chain does not match chunks"))
    for i in range(1, len(rec.chunks)):
        if rec.chunks[i].t_start < rec.chunks[i - 1].t_end:
            findings.append(Finding(i, "order", FAIL, "chunk intervals overlap or go backwards"))
    past = verify_past(rec, archives)
    future = verify_future(rec, logs)
    findings += past + future + verify_coupling(rec, secondary_track)

    statuses = {f.status for f in findings}
    if FAIL in statuses:
        verdict = TAMPERED
    elif DEGRADED in statuses:
        verdict = UNVERIFIABLE
    else:
        verdict = AUTHENTIC

    blocked = {f.index for f in findings if f.status in (FAIL, DEGRADED)}
    past_t = {f.index: f.t for f in past if f.status == PASS}
    future_t = {f.index: f.t for f in future if f.status == PASS}
    last_good = len(rec.chunks) if bad is None else bad
    brackets = [TimeBracket(i, past_t[i], future_t[i]) for i in range(last_good)
                if i not in blocked and i in past_t and i in future_t]
    return Report(verdict, findings, brackets, [MAJORITY_NOTE])
