"""Deterministic discrete-event harness for whole-protocol scenarios.

A global tick clock drives beacons, repositories, one honest recorder and,
optionally, an adversary.  Every message between nodes is delivered
exactly ``delay`` ticks after it is sent.  Adversary knowledge is an
explicit, time-stamped set, and nothing enters it before it was public or
leaked.
"""

from __future__ import annotations

import copy
import json
import random
from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

from .beacon import FAULT_KINDS as BEACON_FAULTS
from .beacon import Archive, Beacon, BeaconEmission, TrgSource
from .combiner import Challenge, NoTrustworthyChallenge, combine_challenge
from .core import digest, make_id, u64, xor_bytes
from .discretion import DiscreetSession
from .recorder import Recorder, Recording, SceneSource, SessionConfig
from .repository import FAULT_KINDS as HAP_FAULTS
from .repository import HapLog
from .verifier import AUTHENTIC, Report, bracket_report

ADVERSARIES = ("none", "forger", "post-hoc-editor", "colluding-beacons")
CHUNK_FIELDS = ("payload", "challenge", "coupling", "index", "t_start", "t_end",
                "challenge_time")


class TimeTravel(AssertionError):
    """Something was observed before it could have been known."""


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    beacons: tuple = ("honest", "honest", "honest")
    delta: int = 3
    repositories: tuple = ("honest",) * 5
    delay: int = 1
    chunk_period: int = 5
    chunks: int = 10
    challenge_bits: int = 256
    adversary: str = "none"
    colluders: int = 0
    stall_ticks: tuple = ()
    mutations: tuple = ()
    coupling: bool = False
    discretion: bool = False
    presence: tuple = ()
    bytes_per_tick: int = 40

    def __post_init__(self):
        object.__setattr__(self, "beacons", tuple(self.beacons))
        object.__setattr__(self, "repositories", tuple(self.repositories))
        object.__setattr__(self, "stall_ticks", tuple(self.stall_ticks))
        object.__setattr__(self, "mutations", tuple(dict(m) for m in self.mutations))
        object.__setattr__(self, "presence",
                           tuple((int(t), tuple(p)) for t, p in self.presence))
        self.validate()

    def validate(self) -> None:
        if not self.beacons or not self.repositories:
            raise ValueError("need at least one beacon and one repository")
        if self.chunks < 1 or self.chunk_period < 1 or self.delta < 1:
            raise ValueError("chunks, chunk_period and delta must be positive")
        if not 0 <= self.delay <= self.chunk_period:
            raise ValueError("delay must be in 0..chunk_period so a challenge lands in its chunk")
        if self.challenge_bits % 8 or not 8 <= self.challenge_bits <= 256:
            raise ValueError("challenge_bits must be a multiple of 8 in 8..256")
        if self.adversary not in ADVERSARIES:
            raise ValueError(f"unknown adversary {self.adversary!r}")
        if not 0 <= self.colluders <= len(self.beacons):
            raise ValueError("colluders out of range")
        if self.adversary == "colluding-beacons" and self.colluders < 1:
            raise ValueError("colluding-beacons needs colluders >= 1")
        for kind in self.beacons:
            if kind not in BEACON_FAULTS:
                raise ValueError(f"unknown beacon fault {kind!r}")
        for kind in self.repositories:
            if kind not in HAP_FAULTS:
                raise ValueError(f"unknown repository fault {kind!r}")

    @property
    def record_start(self) -> int:
        # first tick at which every beacon has a reveal to emit
        return self.delta + 1

    @property
    def ticks(self) -> int:
        return self.record_start + self.chunks * self.chunk_period + self.delay

    def to_json(self) -> dict:
        out = asdict(self)
        out["beacons"] = list(self.beacons)
        out["repositories"] = list(self.repositories)
        out["stall_ticks"] = list(self.stall_ticks)
        out["mutations"] = [dict(m) for m in self.mutations]
        out["presence"] = [[t, list(p)] for t, p in self.presence]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class ScenarioReport:
    verdict: str
    brackets: list
    max_width: Optional[int]
    fault_events: list
    adversary_success: bool
    adversary_verdict: Optional[str] = None
    artifact_digests: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "brackets": [b.to_json() for b in self.brackets],
            "max_width": self.max_width,
            "fault_events": list(self.fault_events),
            "adversary_success": self.adversary_success,
            "adversary_verdict": self.adversary_verdict,
            "artifact_digests": dict(self.artifact_digests),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    report: ScenarioReport
    recording: Optional[Recording]
    verification: Optional[Report]
    beacons: list
    logs: list
    secondary_track: bytes = b""
    adversary_recording: Optional[Recording] = None
    discretion: Optional[DiscreetSession] = None

    @property
    def archives(self) -> dict:
        return {b.beacon_id: b.archive for b in self.beacons}

    def artifacts(self) -> dict:
        """Every produced file, as name -> text."""
        out = {}
        if self.recording is not None:
            out["manifest.json"] = self.recording.dumps()
        if self.adversary_recording is not None:
            out["adversary-manifest.json"] = self.adversary_recording.dumps()
        for i, b in enumerate(self.beacons):
            out[f"beacon-{i}.jsonl"] = b.archive.dumps()
        for i, lg in enumerate(self.logs):
            out[f"hap-{i}.jsonl"] = lg.dumps()
        return out


class Knowledge:
    """What the adversary knows, and since when."""

    def __init__(self):
        self.commitments: dict = {}
        self.reveals: dict = {}  # (beacon_id, emission tick) -> (reveal, learned_at, leaked)

    def learn_emission(self, beacon_id: bytes, emission: BeaconEmission, now: int) -> None:
        if now < emission.t:
            raise TimeTravel(f"emission of t={emission.t} seen at {now}")
        self.commitments.setdefault((beacon_id, emission.t), (emission.commitment, now))
        if emission.reveal is not None:
            self.reveals.setdefault((beacon_id, emission.t), (emission.reveal, now, False))

    def learn_leak(self, beacon_id: bytes, t_commit: int, secret: bytes, delta: int,
                   now: int) -> None:
        if now < t_commit:
            raise TimeTravel(f"secret committed at {t_commit} leaked at {now}")
        self.reveals[(beacon_id, t_commit + delta)] = (secret, now, True)

    def reveal(self, beacon_id: bytes, t_emit: int, now: int) -> Optional[bytes]:
        entry = self.reveals.get((beacon_id, t_emit))
        if entry is None or entry[1] > now:
            return None
        reveal, learned_at, leaked = entry
        if not leaked and learned_at < t_emit:
            raise TimeTravel(f"reveal for t={t_emit} known at {learned_at}")
        return reveal

    def commitments_until(self, now: int) -> dict:
        return {k: c for k, (c, at) in self.commitments.items() if at <= now}


def forge_challenge(knowledge: Knowledge, beacon_ids: Sequence[bytes], t: int, now: int,
                    width: int, rng: random.Random) -> Challenge:
    """Best guess at the challenge for tick ``t`` using only what is known at ``now``."""
    parts = []
    for b in beacon_ids:
        known = knowledge.reveal(b, t, now)
        parts.append(known if known is not None else rng.randbytes(width))
    return Challenge(t, xor_bytes(*parts), frozenset(beacon_ids))


class Forger:
    """Pre-renders each chunk one tick before its challenge becomes public."""

    def __init__(self, session: SessionConfig, knowledge: Knowledge, scene: SceneSource,
                 width: int, rng: random.Random, submit=None,
                 secondary: Optional[SceneSource] = None):
        self.knowledge = knowledge
        self.scene = scene
        self.secondary = secondary
        self.width = width
        self.rng = rng
        self.recorder = Recorder(session, submit=submit)

    def forge_chunk(self, t_start: int, now: int):
        if now >= t_start:
            raise ValueError("a forgery must be made before its challenge is revealed")
        cfg = self.recorder.cfg
        challenge = forge_challenge(self.knowledge, cfg.beacon_ids, t_start, now,
                                    self.width, self.rng)
        return self.recorder.record_chunk(self.scene, challenge, t_start, self.secondary)


def adversary_forge(knowledge: Knowledge, session: SessionConfig, scene: bytes,
                    chunk_starts: Sequence[int], width: int, rng: random.Random,
                    repositories: Sequence[HapLog] = ()) -> Recording:
    """Forge a whole recording, each chunk using knowledge from one tick before it."""
    forger = Forger(session, knowledge, SceneSource(fp=_BytesReader(scene)), width, rng)
    forger.recorder.repositories = list(repositories)
    for t in chunk_starts:
        forger.forge_chunk(t, t - 1)
    return forger.recorder.finalize()


class _BytesReader:
    def __init__(self, data: bytes):
        self._data, self._pos = data, 0

    def read(self, n: int) -> bytes:
        out = self._data[self._pos:self._pos + n]
        self._pos += len(out)
        return out

    def close(self) -> None:
        pass


def _flip_int(value: int, byte: int, mask: int) -> int:
    raw = bytearray(u64(value))
    raw[byte] ^= mask
    return int.from_bytes(raw, "big")


def mutate_after_publication(rec: Recording, spec: Sequence[dict]) -> Recording:
    """Apply post-hoc edits to a copy of a finalized recording.

    Operations: ``{"op": "flip", "chunk": i, "field": f, "offset": j, "mask": m}``
    (``field`` defaults to ``payload``; integer fields flip a byte of their
    big-endian u64 form), ``{"op": "swap", "a": i, "b": j}`` and
    ``{"op": "delete", "chunk": i}``.
    """
    out = copy.deepcopy(rec)
    chunks = out.chunks
    for m in spec:
        op = m.get("op")
        if op == "flip":
            i, name = m["chunk"], m.get("field", "payload")
            offset, mask = m.get("offset", 0), m.get("mask", 1)
            if not 0 <= i < len(chunks) or name not in CHUNK_FIELDS or not 1 <= mask <= 255:
                raise ValueError(f"bad flip target {m}")
            c = chunks[i]
            if name in ("payload", "challenge", "coupling"):
                attr = "coupling_digest" if name == "coupling" else name
                raw = getattr(c, attr)
                raw = bytearray(bytes(32) if raw is None else raw)
                if not 0 <= offset < len(raw):
                    raise ValueError(f"offset {offset} out of range for {name}")
                raw[offset] ^= mask
                chunks[i] = replace(c, **{attr: bytes(raw)})
            else:
                if not 0 <= offset < 8:
                    raise ValueError(f"offset {offset} out of range for {name}")
                chunks[i] = replace(c, **{name: _flip_int(getattr(c, name), offset, mask)})
        elif op == "swap":
            a, b = m["a"], m["b"]
            if not (0 <= a < len(chunks) and 0 <= b < len(chunks)):
                raise ValueError(f"bad swap target {m}")
            chunks[a], chunks[b] = chunks[b], chunks[a]
        elif op == "delete":
            i = m["chunk"]
            if not 0 <= i < len(chunks):
                raise ValueError(f"bad delete target {m}")
            del chunks[i]
        else:
            raise ValueError(f"unknown mutation {m}")
    return out


def _seed_bytes(seed: int, label: str) -> bytes:
    return digest(f"tba-sim:{seed}:{label}".encode())


def _seed_int(seed: int, label: str) -> int:
    return int.from_bytes(_seed_bytes(seed, label)[:8], "big")


def default_presence(start: int, end: int) -> tuple:
    mid = start + (end - start) // 3
    return ((start, ("alice", "bob")), (mid, ("alice", "bob", "carol")),
            (mid + (end - start) // 3, ("alice", "bob")))


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    cfg.validate()
    d, width = cfg.delay, cfg.challenge_bits // 8
    adversary_forges = cfg.adversary in ("forger", "colluding-beacons")
    colluders = cfg.colluders if adversary_forges else 0

    beacons = []
    for i, kind in enumerate(cfg.beacons):
        if i < colluders:
            kind = "leaker"
        trg = TrgSource.seeded(_seed_bytes(cfg.seed, f"beacon-{i}"), cfg.challenge_bits)
        beacons.append(Beacon(make_id(f"beacon-{i}"), trg, cfg.delta, kind, cfg.stall_ticks))
    logs = [HapLog(make_id(f"hap-{i}"), kind) for i, kind in enumerate(cfg.repositories)]
    beacon_ids = tuple(b.beacon_id for b in beacons)

    session = SessionConfig(
        session_id=make_id(f"session-{cfg.seed}"),
        start_time=cfg.record_start,
        chunk_period=cfg.chunk_period,
        beacon_ids=beacon_ids,
        repository_ids=tuple(lg.hap_id for lg in logs),
        bytes_per_tick=cfg.bytes_per_tick,
        coupling_enabled=cfg.coupling,
        encrypted=cfg.discretion,
    )

    queue: dict = defaultdict(list)  # deliver tick -> [(sent tick, kind, payload)]
    events: list = []

    def send(now: int, kind: str, payload) -> None:
        queue[now + d].append((now, kind, payload))

    sealer = None
    if cfg.discretion:
        end = cfg.record_start + cfg.chunks * cfg.chunk_period
        presence = cfg.presence or default_presence(cfg.record_start, end)
        presence = [(t, [make_id(p) for p in people]) for t, people in presence]
        sealer = DiscreetSession(presence, _seed_bytes(cfg.seed, "court"),
                                 random.Random(_seed_int(cfg.seed, "keys")), t_end=end)

    def submitter(tag: str):
        def submit(s: bytes, t_send: int) -> list:
            send(t_send, "submit", (tag, len(recorders[tag].recording.chunks), s))
            return [None] * len(logs)
        return submit

    recorders: dict = {}
    recorders["honest"] = Recorder(session, submit=submitter("honest"), sealer=sealer)
    scene = SceneSource.seeded(_seed_int(cfg.seed, "scene"))
    secondary = SceneSource.seeded(_seed_int(cfg.seed, "audio")) if cfg.coupling else None
    track = bytearray()

    knowledge = Knowledge()
    forger = None
    if adversary_forges:
        forged_session = SessionConfig(**{**session.__dict__,
                                          "session_id": make_id(f"forgery-{cfg.seed}"),
                                          "encrypted": False})
        fake_track = bytearray()
        fake_audio = None
        if cfg.coupling:
            fake_audio = _Tap(SceneSource.seeded(_seed_int(cfg.seed, "fake-audio")), fake_track)
        forger = Forger(forged_session, knowledge, SceneSource.seeded(_seed_int(cfg.seed, "fake")),
                        width, random.Random(_seed_int(cfg.seed, "guess")),
                        submit=submitter("forger"), secondary=fake_audio)
        recorders["forger"] = forger.recorder

    views = {b: Archive(b, cfg.delta) for b in beacon_ids}

    def deliver(now: int) -> None:
        for sent, kind, payload in queue.pop(now, []):
            if now - sent != d:
                raise TimeTravel(f"message sent at {sent} delivered at {now}")
            if kind == "emission":
                bid, e = payload
                views[bid].append(e)
            else:
                tag, index, s = payload
                for j, lg in enumerate(logs):
                    rec = lg.submit(s, now)
                    if rec is None:
                        events.append(f"t={now} hap-{j} dropped a {tag} submission")
                    recorders[tag].note_receipt(index, j, rec)
    starts = [cfg.record_start + k * cfg.chunk_period for k in range(cfg.chunks)]
    challenges: dict = {}

    for now in range(1, cfg.ticks + 1):
        for b in beacons:
            e = b.step(now)
            if e is None:
                events.append(f"t={now} beacon-{beacons.index(b)} stalled")
                continue
            knowledge.learn_emission(b.beacon_id, e, now)
            if now in b.leaked:
                knowledge.learn_leak(b.beacon_id, now, b.leaked[now], b.delta, now)
            send(now, "emission", (b.beacon_id, e))

        deliver(now)

        for k, t_start in enumerate(starts):
            if forger is not None and now == t_start - 1:
                forger.forge_chunk(t_start, now)
            if now == t_start + d:
                try:
                    ch = combine_challenge({b: views[b].at(t_start) for b in beacon_ids},
                                           views, t_start)
                except NoTrustworthyChallenge as exc:
                    ch = exc
                else:
                    for bid, reason in ch.excluded:
                        events.append(f"t={t_start} beacon-{beacon_ids.index(bid)} "
                                      f"excluded: {reason}")
                challenges[k] = ch
            if now == t_start + cfg.chunk_period:
                honest = recorders["honest"]
                before = len(track)
                ch = challenges.pop(k)
                audio = _Tap(secondary, track) if secondary is not None else None
                if isinstance(ch, NoTrustworthyChallenge):
                    honest.record_gap(str(ch), t_start, scene, audio)
                    events.append(f"t={t_start} gap: {ch}")
                else:
                    honest.record_chunk(scene, ch, t_start, audio)
                assert secondary is None or len(track) - before == \
                    cfg.chunk_period * session.secondary_per_tick
        if d == 0:
            deliver(now)

    archives = {b.beacon_id: b.archive for b in beacons}
    track = bytes(track)
    recording = verification = None
    verdict, brackets, max_width = "unverifiable", [], None
    try:
        recording = recorders["honest"].finalize()
    except RuntimeError:
        events.append("no chunk could be recorded")
    else:
        verification = bracket_report(recording, archives, logs, track if cfg.coupling else None)
        verdict, brackets, max_width = (verification.verdict, verification.brackets,
                                        verification.max_width)

    adversary_recording = None
    adversary_verdict = None
    if forger is not None:
        adversary_recording = forger.recorder.finalize()
        # the forger presents its own audio alongside its own recording
        adversary_verdict = bracket_report(adversary_recording, archives, logs,
                                           bytes(fake_track) if cfg.coupling else None).verdict
    elif cfg.adversary == "post-hoc-editor" and recording is not None:
        spec = cfg.mutations or ({"op": "flip", "chunk": 0, "field": "payload", "offset": 0},)
        adversary_recording = mutate_after_publication(recording, spec)
        adversary_verdict = bracket_report(adversary_recording, archives, logs,
                                           track if cfg.coupling else None).verdict

    artifact_digests = {"manifest": None if recording is None else digest(
        recording.dumps().encode()).hex()}
    for i, b in enumerate(beacons):
        artifact_digests[f"beacon-{i}"] = digest(b.archive.dumps().encode()).hex()
    for i, lg in enumerate(logs):
        artifact_digests[f"hap-{i}"] = digest(lg.dumps().encode()).hex()

    report = ScenarioReport(
        verdict=verdict,
        brackets=brackets,
        max_width=max_width,
        fault_events=events,
        adversary_success=adversary_verdict == AUTHENTIC,
        adversary_verdict=adversary_verdict,
        artifact_digests=artifact_digests,
    )
    return ScenarioResult(cfg, report, recording, verification, beacons, logs, track,
                          adversary_recording, sealer)


class _Tap:
    """Wraps a secondary source and keeps everything read from it."""

    def __init__(self, source: SceneSource, sink: bytearray):
        self.source, self.sink = source, sink

    def read(self, n: int) -> bytes:
        data = self.source.read(n)
        self.sink += data
        return data
