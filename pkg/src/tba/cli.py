"""Command-line entry point.

Exit codes: 0 authentic / success, 1 tampered or refused, 2 unverifiable,
64 usage error, 66 unreadable input.  Reports and hex strings go to
stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import random
import sys
from pathlib import Path

from .beacon import Archive, Beacon, TrgSource
from .beacon import handle_request as beacon_request
from .core import digest, make_id, truncate_hex64
from .discretion import (AccessRecord, DiscreetSession, ShareError, court_open, decrypt_ticks,
                         dump_shares, load_shares, reconstruct_key)
from .recorder import Recorder, Recording, SceneSource, SessionConfig
from .repository import HapLog
from .repository import handle_request as hap_request
from .simnet import ScenarioConfig, run_scenario
from .verifier import bracket_report

EX_USAGE = 64
EX_NOINPUT = 66

log = logging.getLogger("tba")


class UsageError(Exception):
    pass


class NoInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EX_USAGE)


def _labelled(spec: str) -> tuple[str, Path]:
    """``label=path`` or bare ``path`` (label = file stem)."""
    if "=" in spec:
        label, path = spec.split("=", 1)
        return label, Path(path)
    return Path(spec).stem, Path(spec)


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise NoInput(f"cannot read {path}: {exc.strerror}") from exc


def _read_text(path) -> str:
    return _read_bytes(path).decode("utf-8")


def _seed(value) -> bytes:
    return int(value).to_bytes(32, "big")


def cmd_beacon(args) -> int:
    beacon_id = make_id(args.id or Path(args.out).stem)
    if args.serve:
        archive = Archive.load(io.StringIO(_read_text(args.out)), beacon_id, args.delta)
        for line in sys.stdin:
            if line.strip():
                print(json.dumps(beacon_request(archive, json.loads(line))), flush=True)
        return 0
    trg = TrgSource.seeded(_seed(args.seed), args.bits) if args.seed is not None \
        else TrgSource(args.bits)
    beacon = Beacon(beacon_id, trg, args.delta)
    for t in range(args.start, args.start + args.ticks):
        beacon.step(t)
    Path(args.out).write_text(beacon.archive.dumps())
    return 0


def cmd_hap(args) -> int:
    path = Path(args.log)
    records = path.read_text() if path.exists() else ""
    hap = HapLog.load(io.StringIO(records), make_id(args.id or path.stem))
    if args.serve:
        for line in sys.stdin:
            if line.strip():
                reply = hap_request(hap, json.loads(line))
                if reply is not None:
                    print(json.dumps(reply), flush=True)
        path.write_text(hap.dumps())
        return 0
    if args.lookup:
        t = hap.lookup(bytes.fromhex(args.lookup))
        print(json.dumps({"error": "not-found"} if t is None else {"t": t}))
        return 0 if t is not None else 1
    if args.t is None:
        raise UsageError("--submit needs --t")
    record = hap.submit(bytes.fromhex(args.submit), args.t)
    path.write_text(hap.dumps())
    print(json.dumps(record.to_json()))
    return 0


def _load_archives(specs, delta, strict=True) -> dict:
    archives = {}
    for spec in specs or ():
        label, path = _labelled(spec)
        if not path.exists():
            if strict:
                raise NoInput(f"cannot read {path}")
            log.warning("beacon archive %s missing", path)
            continue
        with open(path) as fp:
            archives[make_id(label)] = Archive.load(fp, make_id(label), delta)
    return archives


def _load_logs(specs, strict=True) -> list:
    logs = []
    for spec in specs or ():
        label, path = _labelled(spec)
        if not path.exists():
            if strict:
                raise NoInput(f"cannot read {path}")
            log.warning("repository log %s missing", path)
            continue
        with open(path) as fp:
            logs.append(HapLog.load(fp, make_id(label)))
    return logs


def cmd_record(args) -> int:
    archives = _load_archives(args.beacon, args.delta)
    log_paths = [_labelled(s) for s in args.log]
    # logs that do not exist yet start empty
    logs = [HapLog.load(io.StringIO(p.read_text() if p.exists() else ""), make_id(label))
            for label, p in log_paths]
    if args.scene:
        _read_bytes(args.scene)
        scene = SceneSource.from_file(args.scene)
    else:
        scene = SceneSource.seeded(args.scene_seed)
    secondary = None
    if args.secondary:
        _read_bytes(args.secondary)
        secondary = SceneSource.from_file(args.secondary)
    cfg = SessionConfig(
        session_id=make_id(args.session),
        start_time=args.start,
        chunk_period=args.period,
        beacon_ids=tuple(archives),
        repository_ids=tuple(h.hap_id for h in logs),
        bytes_per_tick=args.bytes_per_tick,
        coupling_enabled=secondary is not None,
    )
    recorder = Recorder(cfg, logs)
    for _ in range(args.chunks):
        recorder.record_from_archives(scene, archives, secondary=secondary)
    scene.close()
    if secondary is not None:
        secondary.close()
    rec = recorder.finalize()
    Path(args.out).write_text(rec.dumps())
    for (_, p), hap in zip(log_paths, logs):
        p.write_text(hap.dumps())
    return 0


def cmd_verify(args) -> int:
    rec = Recording.loads(_read_text(args.manifest))
    archives = _load_archives(args.beacon, args.delta, strict=False)
    logs = _load_logs(args.log, strict=False)
    track = _read_bytes(args.secondary) if args.secondary else None
    report = bracket_report(rec, archives, logs, track)
    print(json.dumps(report.to_json(), sort_keys=True, indent=2))
    return report.exit_code


def cmd_sim(args) -> int:
    cfg = ScenarioConfig.from_json(json.loads(_read_text(args.config)))
    result = run_scenario(cfg)
    Path(args.report).write_text(json.dumps(result.report.to_json(), sort_keys=True, indent=2))
    if args.artifacts:
        out = Path(args.artifacts)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in result.artifacts().items():
            (out / name).write_text(text)
    return 0


def cmd_seal(args) -> int:
    data = _read_bytes(args.input)
    presence = json.loads(_read_text(args.presence))
    names = sorted({p for _, people in presence for p in people})
    presence = [(int(t), [make_id(p) for p in people]) for t, people in presence]
    entropy = random.Random(args.seed) if args.seed is not None else None
    t_end = args.start + -(-len(data) // args.bytes_per_tick)
    session = DiscreetSession(presence, bytes.fromhex(args.court_key), entropy, t_end=t_end)
    sealed = {
        "start": args.start,
        "bytes_per_tick": args.bytes_per_tick,
        "ciphertext": session.encrypt_ticks(args.start, data, args.bytes_per_tick).hex(),
        "access": [a.to_json() for a in session.access],
        "participants": {make_id(n).hex(): n for n in names},
    }
    Path(args.out).write_text(json.dumps(sealed, sort_keys=True, indent=2))
    with open(args.shares, "w") as fp:
        dump_shares(session.shares, fp)
    return 0


def cmd_open(args) -> int:
    sealed = json.loads(_read_text(args.sealed))
    access = [AccessRecord.from_json(a) for a in sealed["access"]]
    keys = {}
    if args.court_key:
        court = bytes.fromhex(args.court_key)
        for a in access:
            try:
                keys[a.segment_id] = court_open(a.escrow, a.segment_id, court, a.checksum)
            except ShareError as exc:
                print(f"segment {a.segment_id}: {exc}", file=sys.stderr)
    else:
        shares = []
        for path in args.shares or ():
            shares += load_shares(io.StringIO(_read_text(path)))
        for a in access:
            mine = [s for s in shares if s.segment_id == a.segment_id]
            try:
                keys[a.segment_id] = reconstruct_key(mine, a)
            except ShareError as exc:
                print(f"segment {a.segment_id}: {exc}", file=sys.stderr)
    plain = decrypt_ticks([(sealed["start"], bytes.fromhex(sealed["ciphertext"]))],
                          sealed["bytes_per_tick"], keys, access)
    Path(args.out).write_bytes(plain)
    return 0 if len(keys) == len(access) else 1


def cmd_lite_hash(args) -> int:
    print(truncate_hex64(digest(_read_bytes(args.file))))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tba", description="Time-bracketed authentication toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("beacon", help="run a beacon, writing its JSON-Lines archive")
    b.add_argument("--ticks", type=int, default=10)
    b.add_argument("--start", type=int, default=1)
    b.add_argument("--delta", type=int, default=3)
    b.add_argument("--seed", type=int, help="deterministic TRG (tests only)")
    b.add_argument("--bits", type=int, default=256)
    b.add_argument("--id", help="beacon label (default: stem of --out)")
    b.add_argument("--out", required=True)
    b.add_argument("--serve", action="store_true",
                   help="answer latest/at requests on stdin from an existing archive")
    b.set_defaults(func=cmd_beacon)

    h = sub.add_parser("hap", help="submit to, query, or serve a hash-and-publish log")
    h.add_argument("--log", required=True)
    h.add_argument("--id")
    g = h.add_mutually_exclusive_group(required=True)
    g.add_argument("--submit", metavar="HEX")
    g.add_argument("--lookup", metavar="HEX")
    g.add_argument("--serve", action="store_true")
    h.add_argument("--t", type=int)
    h.set_defaults(func=cmd_hap)

    r = sub.add_parser("record", help="record against existing archives and logs")
    r.add_argument("--beacon", action="append", required=True, metavar="[LABEL=]PATH")
    r.add_argument("--log", action="append", required=True, metavar="[LABEL=]PATH")
    r.add_argument("--delta", type=int, default=3)
    r.add_argument("--session", default="session")
    r.add_argument("--start", type=int, required=True)
    r.add_argument("--period", type=int, default=5)
    r.add_argument("--chunks", type=int, default=1)
    r.add_argument("--bytes-per-tick", type=int, default=40)
    r.add_argument("--scene", help="raw scene bytes (default: seeded synthetic)")
    r.add_argument("--scene-seed", type=int, default=0)
    r.add_argument("--secondary", help="secondary track for modality coupling")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_record)

    v = sub.add_parser("verify", help="verify a manifest; exit 0/1/2")
    v.add_argument("--manifest", required=True)
    v.add_argument("--beacon", action="append", metavar="[LABEL=]PATH")
    v.add_argument("--log", action="append", metavar="[LABEL=]PATH")
    v.add_argument("--delta", type=int, default=3)
    v.add_argument("--secondary")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sim", help="run a scenario config, write a report")
    s.add_argument("config")
    s.add_argument("report")
    s.add_argument("--artifacts", help="directory for manifests, archives and logs")
    s.set_defaults(func=cmd_sim)

    se = sub.add_parser("seal", help="encrypt a recording with per-segment shared keys")
    se.add_argument("--in", dest="input", required=True)
    se.add_argument("--presence", required=True, help='JSON [[t, ["alice", ...]], ...]')
    se.add_argument("--court-key", required=True, help="64 hex chars")
    se.add_argument("--start", type=int, default=0)
    se.add_argument("--bytes-per-tick", type=int, default=40)
    se.add_argument("--seed", type=int)
    se.add_argument("--out", required=True)
    se.add_argument("--shares", required=True, help="JSON-Lines share output")
    se.set_defaults(func=cmd_seal)

    o = sub.add_parser("open", help="decrypt with all shares or the court key")
    o.add_argument("--sealed", required=True)
    o.add_argument("--shares", action="append")
    o.add_argument("--court-key")
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_open)

    lh = sub.add_parser("lite-hash", help="64-bit short hash of a file")
    lh.add_argument("file")
    lh.set_defaults(func=cmd_lite_hash)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except NoInput as exc:
        print(f"tba: {exc}", file=sys.stderr)
        return EX_NOINPUT
    except UsageError as exc:
        print(f"tba: {exc}", file=sys.stderr)
        return EX_USAGE


if __name__ == "__main__":
    sys.exit(main())
