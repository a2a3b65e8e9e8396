import hashlib
import io
import random

import pytest

from tba.core import make_id, xor_bytes
from tba.discretion import (AccessRecord, DiscreetSession, SegmentKey, Share, ShareError,
                            court_escrow, court_open, decrypt_ticks, dump_shares,
                            encrypt_segment, gen_segment_key, key_checksum, keystream,
                            load_shares, reconstruct_key, segment_session, split_key, xor_split)

A, B, C, D, E = (make_id(n) for n in "ABCDE")


def access_for(k):
    return AccessRecord(k.segment_id, 0, None, (), k.checksum, bytes(32))


def test_keys_distinct_reproducible_and_checksummed():
    rng = random.Random(1)
    k0, k1 = gen_segment_key(0, rng), gen_segment_key(1, rng)
    assert k0.key != k1.key
    assert k0.checksum == hashlib.sha256(k0.key + (0).to_bytes(8, "big")).digest()
    again = random.Random(1)
    assert gen_segment_key(0, again) == k0


def test_encrypt_known_triple():
    k = SegmentKey.from_key(bytes(range(32)), 7)
    plain = b"the quick brown fox jumps over the lazy dog, twice over"
    h = hashlib.sha256
    stream = b"".join(h(k.key + (7).to_bytes(8, "big") + i.to_bytes(8, "big")).digest()
                      for i in range(2))
    assert encrypt_segment(k, plain) == bytes(a ^ b for a, b in zip(plain, stream))
    assert encrypt_segment(k, b"") == b""


def test_involution_and_offsets():
    k = gen_segment_key(3, random.Random(2))
    data = random.Random(3).randbytes(300)
    assert encrypt_segment(k, encrypt_segment(k, data)) == data
    whole = encrypt_segment(k, data)
    pieces = encrypt_segment(k, data[:70]) + encrypt_segment(k, data[70:], offset=70)
    assert pieces == whole
    assert keystream(k, 10, 40) == keystream(k, 60)[40:50]


def test_segment_isolation():
    rng = random.Random(4)
    keys = [gen_segment_key(i, rng) for i in range(5)]
    pads = {keystream(k, 64) for k in keys}
    assert len(pads) == 5


def test_split_degenerate_and_pairs():
    k = gen_segment_key(0, random.Random(5))
    (only,) = split_key(k, [A], random.Random(6))
    assert only.value == k.key
    s1, s2 = split_key(k, [A, B], random.Random(6))
    assert s2.value == xor_bytes(k.key, s1.value)
    shares = split_key(k, [A, B, C, D, E], random.Random(7))
    assert xor_bytes(*(s.value for s in shares)) == k.key
    with pytest.raises(ValueError):
        split_key(k, [], random.Random(1))


def test_reconstruct_all_vs_leave_one_out():
    k = gen_segment_key(0, random.Random(8))
    shares = split_key(k, [A, B, C, D], random.Random(9))
    rec = access_for(k)
    assert reconstruct_key(shares, rec).key == k.key
    for i in range(4):
        with pytest.raises(ShareError, match="insufficient or corrupted"):
            reconstruct_key(shares[:i] + shares[i + 1:], rec)
    flipped = Share(A, 0, xor_bytes(shares[0].value, b"\x01" + bytes(31)))
    with pytest.raises(ShareError):
        reconstruct_key([flipped] + shares[1:], rec)


def test_uniform_posterior_toy_width():
    rng = random.Random(10)
    secret = bytes([rng.randrange(256)])
    parts = xor_split(secret, 4, rng)
    for missing in range(4):
        known = parts[:missing] + parts[missing + 1:]
        candidates = [xor_bytes(*known, bytes([g])) for g in range(256)]
        assert sorted(candidates) == [bytes([v]) for v in range(256)]


def test_court_escrow():
    k = gen_segment_key(2, random.Random(11))
    court = b"\x42" * 32
    blob = court_escrow(k, court)
    assert court_open(blob, 2, court, k.checksum) == k
    with pytest.raises(ShareError):
        court_open(blob, 2, b"\x43" * 32, k.checksum)
    pad0 = hashlib.sha256(court + (0).to_bytes(8, "big")).digest()
    pad1 = hashlib.sha256(court + (1).to_bytes(8, "big")).digest()
    assert pad0 != pad1
    k0 = SegmentKey.from_key(k.key, 0)
    assert court_escrow(k0, court) == xor_bytes(k.key, pad0)


def test_segment_session():
    assert len(segment_session([(0, {A, B}), (5, {A, B}), (9, {B, A})])) == 1
    segs = segment_session([(0, {A, B}), (10, {A, B, C}), (20, {A, B})], t_end=30)
    assert [(s.t_start, s.t_end, s.participants) for s in segs] == [
        (0, 10, {A, B}), (10, 20, {A, B, C}), (20, 30, {A, B})]
    gap = segment_session([(0, {A}), (5, set()), (8, {A})])
    assert [(s.t_start, s.t_end) for s in gap] == [(0, 5), (8, None)]
    with pytest.raises(ValueError):
        segment_session([])
    with pytest.raises(ValueError):
        segment_session([(5, {A}), (1, {B})])


def test_discreet_session_round_trip():
    court = b"\x01" * 32
    presence = [(0, [A, B]), (3, [A, B, C]), (6, [])]
    s = DiscreetSession(presence, court, random.Random(12), t_end=10)
    plain = random.Random(13).randbytes(10 * 4)
    pieces = [(0, s.encrypt_ticks(0, plain[:20], 4)), (5, s.encrypt_ticks(5, plain[20:], 4))]
    assert pieces[0][1] != plain[:20]
    assert pieces[1][1][4:] == bytes(16)  # empty room from tick 6
    keys = {a.segment_id: reconstruct_key([sh for sh in s.shares if sh.segment_id == a.segment_id],
                                          a) for a in s.access}
    out = decrypt_ticks(pieces, 4, keys, s.access)
    assert out[:24] == plain[:24] and out[24:] == bytes(16)
    # court alone opens everything
    court_keys = {a.segment_id: court_open(a.escrow, a.segment_id, court, a.checksum)
                  for a in s.access}
    assert decrypt_ticks(pieces, 4, court_keys, s.access) == out
    # a missing party's segment stays sealed
    partial = decrypt_ticks(pieces, 4, {0: keys[0]}, s.access)
    assert partial[:12] == plain[:12] and partial[12:24] == bytes(12)


def test_share_and_access_json():
    s = DiscreetSession([(0, [A, B])], bytes(32), random.Random(1), t_end=5)
    buf = io.StringIO()
    dump_shares(s.shares, buf)
    first = buf.getvalue().splitlines()[0]
    assert first.startswith('{"participant":"') and '"segment":0' in first
    assert load_shares(io.StringIO(buf.getvalue())) == s.shares
    a = s.access[0]
    assert AccessRecord.from_json(a.to_json()) == a
    assert a.checksum == key_checksum(s.keys[0].key, 0)
