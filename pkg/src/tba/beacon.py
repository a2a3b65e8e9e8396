"""Precommitting random beacon.

At each tick ``t`` a beacon draws a fresh secret ``r(t)``, publishes its
hash as a commitment, and reveals the secret it drew ``delta`` ticks
earlier.  A verifier holding the archive can then check every reveal
against the commitment that preceded it.

Seeded TRG mode is for reproducible tests only.  A beacon whose
"randomness" is a function of a known seed is, for every purpose that
matters, a dishonest beacon.
"""

from __future__ import annotations

import bisect
import copy
import json
import os
import random
from collections import deque
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Optional

from .core import check_digest, digest

DEFAULT_BITS = 256
DEFAULT_DELTA = 3

FAULT_KINDS = ("honest", "equivocator", "staller", "leaker")


class EntropyError(RuntimeError):
    """The OS entropy source failed; the beacon must stall."""


class GapError(LookupError):
    """An emission the check depends on is missing from the archive."""

    def __init__(self, t: int):
        super().__init__(f"no emission archived at t={t}")
        self.t = t


class TrgSource:
    """Random string generator standing in for a hardware TRG."""

    def __init__(self, bits: int = DEFAULT_BITS, seed: Optional[bytes] = None):
        if bits <= 0 or bits % 8:
            raise ValueError("bits must be a positive multiple of 8")
        self.bits = bits
        self.mode = "os-entropy" if seed is None else "seeded"
        self._rng = None if seed is None else random.Random(bytes(seed))

    @classmethod
    def seeded(cls, seed: bytes | int, bits: int = DEFAULT_BITS) -> "TrgSource":
        if isinstance(seed, int):
            seed = seed.to_bytes(32, "big")
        if len(seed) != 32:
            raise ValueError("seed must be 32 bytes")
        return cls(bits, seed)

    def randbytes(self, n: int) -> bytes:
        if self._rng is not None:
            return self._rng.randbytes(n)
        try:
            return os.urandom(n)
        except (NotImplementedError, OSError) as exc:
            raise EntropyError("entropy source unavailable") from exc

    def next(self) -> bytes:
        return self.randbytes(self.bits // 8)


def trg_next(source: TrgSource) -> bytes:
    return source.next()


@dataclass(frozen=True)
class BeaconEmission:
    t: int
    commitment: bytes
    reveal: Optional[bytes] = None

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "commit": self.commitment.hex(),
            "reveal": None if self.reveal is None else self.reveal.hex(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BeaconEmission":
        reveal = obj.get("reveal")
        return cls(
            t=int(obj["t"]),
            commitment=check_digest(bytes.fromhex(obj["commit"]), "commit"),
            reveal=None if reveal is None else bytes.fromhex(reveal),
        )


class Archive:
    """Append-only, time-indexed list of one beacon's emissions."""

    def __init__(self, beacon_id: bytes, delta: int = DEFAULT_DELTA,
                 emissions: Iterable[BeaconEmission] = ()):
        self.beacon_id = bytes(beacon_id)
        self.delta = delta
        self._emissions: list[BeaconEmission] = []
        self._times: list[int] = []
        for e in emissions:
            self.append(e)

    def append(self, emission: BeaconEmission) -> None:
        if self._times and emission.t <= self._times[-1]:
            raise ValueError("archive timestamps must be strictly increasing")
        self._emissions.append(emission)
        self._times.append(emission.t)

    def at(self, t: int) -> Optional[BeaconEmission]:
        i = bisect.bisect_left(self._times, t)
        if i < len(self._times) and self._times[i] == t:
            return self._emissions[i]
        return None

    def latest(self) -> Optional[BeaconEmission]:
        return self._emissions[-1] if self._emissions else None

    def covers(self, t: int) -> bool:
        """True if the archive extends at least to ``t`` (a hole inside is a gap)."""
        return bool(self._times) and self._times[-1] >= t

    def snapshot(self) -> tuple[BeaconEmission, ...]:
        return tuple(self._emissions)

    def truncated(self, t_last: int) -> "Archive":
        return Archive(self.beacon_id, self.delta, (e for e in self._emissions if e.t <= t_last))

    def __iter__(self) -> Iterator[BeaconEmission]:
        return iter(tuple(self._emissions))

    def __len__(self) -> int:
        return len(self._emissions)

    def dump(self, fp: IO[str]) -> None:
        for e in self._emissions:
            fp.write(json.dumps(e.to_json(), separators=(",", ":")) + "\n")

    def dumps(self) -> str:
        return "".join(json.dumps(e.to_json(), separators=(",", ":")) + "\n" for e in self._emissions)

    @classmethod
    def load(cls, fp: IO[str], beacon_id: bytes, delta: int = DEFAULT_DELTA) -> "Archive":
        return cls(beacon_id, delta,
                   (BeaconEmission.from_json(json.loads(line)) for line in fp if line.strip()))


class Beacon:
    """Single-writer beacon state machine.

    ``fault`` selects a misbehaviour for testing: ``equivocator`` reveals
    fresh strings unrelated to its commitments, ``staller`` emits nothing at
    ``stall_ticks``, ``leaker`` is honest on the wire but copies each secret
    into :attr:`leaked` at the moment it is committed.
    """

    def __init__(self, beacon_id: bytes, trg: TrgSource, delta: int = DEFAULT_DELTA,
                 fault: str = "honest", stall_ticks: Iterable[int] = ()):
        if delta < 1:
            raise ValueError("delta must be at least one tick")
        if fault not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {fault!r}")
        self.beacon_id = bytes(beacon_id)
        self.delta = delta
        self.trg = trg
        self.fault = fault
        self.stall_ticks = frozenset(stall_ticks)
        self.pending: deque[tuple[int, bytes]] = deque()
        self.archive = Archive(self.beacon_id, delta)
        self.leaked: dict[int, bytes] = {}
        self._last_t: Optional[int] = None

    @property
    def bits(self) -> int:
        return self.trg.bits

    def step(self, t: int) -> Optional[BeaconEmission]:
        """Advance to tick ``t``; returns the emission, or None if stalled."""
        if self._last_t is not None and t <= self._last_t:
            raise ValueError(f"non-monotone tick {t} after {self._last_t}")
        self._last_t = t
        # Secrets older than the reveal horizon can never be released any more.
        while self.pending and self.pending[0][0] < t - self.delta:
            self.pending.popleft()
        if self.fault == "staller" and t in self.stall_ticks:
            return None

        secret = self.trg.next()
        if self.fault == "leaker":
            self.leaked[t] = secret
        reveal = None
        if self.pending and self.pending[0][0] == t - self.delta:
            _, reveal = self.pending.popleft()
            if self.fault == "equivocator":
                reveal = self.trg.next()
        self.pending.append((t, secret))

        emission = BeaconEmission(t, digest(secret), reveal)
        self.archive.append(emission)
        return emission


def beacon_step(state: Beacon, t: int) -> Optional[BeaconEmission]:
    return state.step(t)


def make_faulty(state: Beacon, kind: str, stall_ticks: Iterable[int] = ()) -> Beacon:
    """Return a copy of ``state`` that misbehaves as ``kind``."""
    if kind not in FAULT_KINDS:
        raise ValueError(f"unknown fault kind {kind!r}")
    faulty = copy.deepcopy(state)
    faulty.fault = kind
    faulty.stall_ticks = frozenset(stall_ticks)
    return faulty


def verify_emission(archive: Archive, t: int) -> bool:
    """Check the reveal at ``t`` against the commitment made ``delta`` earlier.

    Raises :class:`GapError` when either emission is missing; a missing
    emission means a stalled beacon, not a forgery.  Emissions carrying no
    reveal verify vacuously.
    """
    current = archive.at(t)
    if current is None:
        raise GapError(t)
    if current.reveal is None:
        return True
    earlier = archive.at(t - archive.delta)
    if earlier is None:
        raise GapError(t - archive.delta)
    return digest(current.reveal) == earlier.commitment


def handle_request(archive: Archive, request: dict) -> dict:
    """Service-mode dispatcher: ``{"op": "latest"}`` or ``{"op": "at", "t": n}``."""
    op = request.get("op")
    if op == "latest":
        e = archive.latest()
    elif op == "at":
        e = archive.at(int(request["t"]))
    else:
        return {"error": "bad-request"}
    return {"error": "not-found"} if e is None else e.to_json()
