"""Hash-and-publish logs.

A client hashes its content locally and submits only that hash ``s``.  The
log hashes again and publishes ``(t, h(s))``, so it never holds anything
but random-looking 32-byte values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Callable, Iterable, Optional, Sequence

from .core import check_digest, digest, now_ms

FAULT_KINDS = ("honest", "dropper", "rewriter")


@dataclass(frozen=True)
class HapRecord:
    t: int
    v: bytes

    def __post_init__(self):
        check_digest(self.v, "published value")

    def to_json(self) -> dict:
        return {"t": self.t, "v": self.v.hex()}

    @classmethod
    def from_json(cls, obj: dict) -> "HapRecord":
        return cls(int(obj["t"]), bytes.fromhex(obj["v"]))


class HapLog:
    """One repository's append-only publication log.

    ``fault="dropper"`` silently discards the submissions whose 0-based
    arrival numbers are in ``drop`` (all of them when ``drop`` is None).
    ``fault="rewriter"`` publishes honestly but allows :meth:`rewrite`.
    """

    def __init__(self, hap_id: bytes, fault: str = "honest",
                 drop: Optional[Iterable[int]] = None,
                 records: Iterable[HapRecord] = ()):
        if fault not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {fault!r}")
        self.hap_id = bytes(hap_id)
        self.fault = fault
        self.drop = None if drop is None else frozenset(drop)
        self._records: list[HapRecord] = list(records)
        self._arrivals = 0

    @property
    def records(self) -> tuple[HapRecord, ...]:
        return tuple(self._records)

    def _last_t(self) -> Optional[int]:
        return self._records[-1].t if self._records else None

    def submit(self, s: bytes, t_now: int) -> Optional[HapRecord]:
        check_digest(s, "submission")
        last = self._last_t()
        if last is not None and t_now < last:
            raise ValueError(f"non-monotone submission time {t_now} < {last}")
        arrival = self._arrivals
        self._arrivals += 1
        if self.fault == "dropper" and (self.drop is None or arrival in self.drop):
            return None
        record = HapRecord(t_now, digest(s))
        self._records.append(record)
        return record

    def lookup(self, v: bytes) -> Optional[int]:
        times = [r.t for r in self._records if r.v == v]
        return min(times) if times else None

    def rewrite(self, index: int, record: Optional[HapRecord] = None) -> None:
        """Post-hoc edit (rewriter fault only): replace or delete a record."""
        if self.fault != "rewriter":
            raise PermissionError("honest logs are append-only")
        if record is None:
            del self._records[index]
        else:
            self._records[index] = record

    def dumps(self) -> str:
        return "".join(json.dumps(r.to_json(), separators=(",", ":")) + "\n" for r in self._records)

    def dump(self, fp: IO[str]) -> None:
        fp.write(self.dumps())

    @classmethod
    def load(cls, fp: IO[str], hap_id: bytes) -> "HapLog":
        return cls(hap_id, records=(HapRecord.from_json(json.loads(line)) for line in fp if line.strip()))


def prepare_submission(content: bytes) -> bytes:
    """Client-side pre-hash; the content itself never leaves the client."""
    return digest(content)


def hap_submit(log: HapLog, s: bytes, t_now: int) -> Optional[HapRecord]:
    return log.submit(s, t_now)


def hap_lookup(log: HapLog, v: bytes) -> Optional[int]:
    return log.lookup(v)


def majority_time(logs: Sequence[HapLog], s: bytes, m: Optional[int] = None) -> Optional[int]:
    """Earliest tick at which a strict majority of ``m`` logs published ``h(s)``.

    Sort the per-log earliest times and take the ceil((m+1)/2)-th.  ``m``
    defaults to ``len(logs)``; pass the configured count when some logs
    could not be fetched.
    """
    if not logs:
        raise ValueError("need at least one log")
    m = len(logs) if m is None else m
    if m < len(logs):
        raise ValueError("more logs than configured repositories")
    v = digest(s)
    times = sorted(t for t in (log.lookup(v) for log in logs) if t is not None)
    need = m // 2 + 1
    return times[need - 1] if len(times) >= need else None


def verify_majority(logs: Sequence[HapLog], s: bytes, t_max: Optional[int] = None) -> bool:
    t = majority_time(logs, s)
    return t is not None and (t_max is None or t <= t_max)


def mirror_divergence(log: HapLog, mirror: HapLog) -> Optional[int]:
    """First index at which two copies of a log disagree, or None if identical."""
    a, b = log.records, mirror.records
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return None if len(a) == len(b) else min(len(a), len(b))


def handle_request(log: HapLog, request: dict,
                   clock: Callable[[], int] = now_ms) -> Optional[dict]:
    """Service-mode dispatcher for ``submit`` and ``lookup`` requests.

    A dropped submission yields None: the client sees silence, not a refusal.
    """
    op = request.get("op")
    try:
        if op == "submit":
            record = log.submit(bytes.fromhex(request["s"]), clock())
            return None if record is None else record.to_json()
        if op == "lookup":
            t = log.lookup(check_digest(bytes.fromhex(request["v"])))
            return {"error": "not-found"} if t is None else {"t": t}
    except (KeyError, ValueError):
        pass
    return {"error": "bad-request"}
