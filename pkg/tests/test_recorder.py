import hashlib

import pytest

from tba.combiner import Challenge
from tba.core import canonical_chunk_bytes, chain_extend, digest, make_id
from tba.recorder import (DegenerateChunkWarning, EmptyWindowWarning, Recorder, Recording,
                          SceneSource, SessionConfig, bind_challenge, couple_modalities)
from tba.verifier import recompute_chain

from helpers import record, setup

CFG = SessionConfig(make_id("s"), 0, 5)
CHAL = bytes(range(32))


def oracle_marker(challenge, index, j, n=8):
    return hashlib.sha256(challenge + index.to_bytes(8, "big") + j.to_bytes(8, "big")).digest()[:n]


def test_markers_placed_by_stride():
    out = bind_challenge(bytes(200), CHAL, 3, CFG)
    expected = bytearray(200)
    for j in range(4):  # j*64 + 8 <= 200 holds for j = 0..3
        expected[j * 64:j * 64 + 8] = oracle_marker(CHAL, 3, j)
    assert out == bytes(expected)
    assert out[8:64] == bytes(56) and out[200 - 0:] == b""


def test_markers_leave_tail_after_last_fit():
    out = bind_challenge(bytes(199), CHAL, 0, CFG)
    assert [out[j * 64:j * 64 + 8] == oracle_marker(CHAL, 0, j) for j in range(3)] == [True] * 3
    assert out[192:] == bytes(7)


def test_markers_deterministic_and_challenge_sensitive():
    a = bind_challenge(bytes(100), CHAL, 0, CFG)
    assert a == bind_challenge(bytes(100), CHAL, 0, CFG)
    assert a[:8] != bind_challenge(bytes(100), bytes(32), 0, CFG)[:8]


def test_degenerate_payload():
    with pytest.warns(DegenerateChunkWarning):
        assert bind_challenge(b"abc", CHAL, 0, CFG) == b"abc"
    with pytest.raises(ValueError):
        bind_challenge(b"", CHAL, 0, CFG)


def test_coupling_digest():
    assert couple_modalities(b"audio") == digest(b"audio")
    with pytest.warns(EmptyWindowWarning):
        assert couple_modalities(b"") == digest(b"")


def test_session_config_invariants():
    for bad in (dict(chunk_period=0), dict(marker_len=33), dict(marker_stride=8)):
        with pytest.raises(ValueError):
            SessionConfig(make_id("s"), **{"start_time": 0, "chunk_period": 5, **bad})


def test_fault_free_receipts_double_hash_chain_head():
    beacons, logs = setup()
    rec, _, _ = record(beacons, logs)
    for head, row, chunk in zip(rec.chain, rec.receipts, rec.chunks):
        assert len(row) == 5
        for r in row:
            assert r.v == digest(digest(head.digest))
            assert r.t == chunk.t_end
        assert chunk.t_start <= chunk.challenge_time <= chunk.t_end


def test_dropper_receipt_absent():
    beacons, logs = setup(hap_kinds=("honest",) * 4 + ("dropper",))
    rec, _, _ = record(beacons, logs)
    assert all(row[4] is None and all(row[:4]) for row in rec.receipts)


def test_gap_when_all_beacons_equivocate():
    beacons, logs = setup(kinds=("equivocator", "equivocator"))
    cfg = SessionConfig(make_id("s"), 4, 5, tuple(b.beacon_id for b in beacons))
    r = Recorder(cfg, logs)
    out = r.record_from_archives(SceneSource.seeded(0), {b.beacon_id: b.archive for b in beacons})
    assert out == {"t_start": 4, "t_end": 9, "reason": out["reason"]}
    assert r.recording.chunks == [] and r.recording.gaps == [out]
    with pytest.raises(RuntimeError):
        r.finalize()


def test_challenge_outside_interval_rejected():
    r = Recorder(SessionConfig(make_id("s"), 10, 5))
    with pytest.raises(ValueError):
        r.record_chunk(SceneSource.seeded(0), Challenge(3, CHAL, frozenset()), 10)


def test_chain_invariant_and_marker_verifiability():
    beacons, logs = setup()
    rec, _, _ = record(beacons, logs, coupling=True)
    head = rec.genesis()
    assert head.digest == digest(rec.config.header_bytes())
    for chunk, stored in zip(rec.chunks, rec.chain):
        head = chain_extend(head, canonical_chunk_bytes(chunk, rec.config.session_id))
        assert head == stored
        for j in range(len(chunk.payload) // 64 + 1):
            if j * 64 + 8 <= len(chunk.payload):
                assert chunk.payload[j * 64:j * 64 + 8] == oracle_marker(chunk.challenge,
                                                                        chunk.index, j)


def test_coupling_absent_when_disabled():
    beacons, logs = setup()
    rec, _, _ = record(beacons, logs, coupling=False)
    assert all(c.coupling_digest is None for c in rec.chunks)
    frame = canonical_chunk_bytes(rec.chunks[0], rec.config.session_id)
    assert frame[81:113] == bytes(32)


def test_manifest_round_trip_bit_exact():
    beacons, logs = setup()
    rec, _, _ = record(beacons, logs, coupling=True)
    text = rec.dumps()
    back = Recording.loads(text)
    assert back.dumps() == text
    assert back.chunks == rec.chunks and back.chain == rec.chain


def test_flipped_payload_breaks_chain_recomputation():
    beacons, logs = setup()
    rec, _, _ = record(beacons, logs)
    obj = rec.to_json()
    import base64
    raw = bytearray(base64.b64decode(obj["chunks"][2]["payload"]))
    raw[100] ^= 1
    obj["chunks"][2]["payload"] = base64.b64encode(raw).decode()
    heads = recompute_chain(Recording.from_json(obj))
    assert heads[:2] == rec.chain[:2] and heads[2] != rec.chain[2]


def test_scene_file_mode(tmp_path):
    path = tmp_path / "scene.bin"
    path.write_bytes(bytes(range(256)))
    src = SceneSource.from_file(path)
    assert src.read(10) == bytes(range(10)) and src.read(3) == bytes([10, 11, 12])
    src.close()
