import io
import os

import pytest
from hypothesis import given, strategies as st

from tba.core import digest, make_id
from tba.repository import (HapLog, HapRecord, handle_request, hap_lookup, hap_submit,
                            majority_time, mirror_divergence, prepare_submission,
                            verify_majority)

SHA256_EMPTY = bytes.fromhex("e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855")


def logs(kinds):
    return [HapLog(make_id(f"hap{i}"), k) for i, k in enumerate(kinds)]


def test_prepare_submission_is_digest():
    assert prepare_submission(b"") == SHA256_EMPTY
    assert prepare_submission(b"content") == digest(b"content")


@given(st.binary(max_size=200))
def test_double_hash_publication(content):
    log = HapLog(make_id("h"))
    rec = hap_submit(log, prepare_submission(content), 1)
    assert rec.v == digest(digest(content))


def test_only_digests_are_stored():
    log = HapLog(make_id("h"))
    content = b"a meaningful and possibly objectionable sentence"
    hap_submit(log, prepare_submission(content), 1)
    with pytest.raises(ValueError):
        hap_submit(log, content, 2)  # raw content is refused outright
    dump = log.dumps()
    assert content.hex() not in dump and content.decode() not in dump
    assert all(set(vars(r)) == {"t", "v"} and len(r.v) == 32 for r in log.records)


def test_duplicates_appended_and_earliest_wins():
    log = HapLog(make_id("h"))
    s = prepare_submission(b"x")
    hap_submit(log, s, 5)
    hap_submit(log, s, 9)
    assert [r.t for r in log.records] == [5, 9]
    assert hap_lookup(log, digest(s)) == 5
    assert hap_lookup(log, digest(b"never")) is None


def test_non_monotone_rejected():
    log = HapLog(make_id("h"))
    hap_submit(log, digest(b"a"), 5)
    with pytest.raises(ValueError):
        hap_submit(log, digest(b"b"), 4)


def test_dropper():
    (log,) = logs(["dropper"])
    assert hap_submit(log, digest(b"a"), 1) is None
    assert log.records == ()
    partial = HapLog(make_id("p"), "dropper", drop={1})
    assert hap_submit(partial, digest(b"a"), 1) is not None
    assert hap_submit(partial, digest(b"b"), 2) is None
    assert hap_submit(partial, digest(b"c"), 3) is not None


def test_rewriter_deletion_tolerated_by_majority():
    ls = logs(["honest"] * 4 + ["rewriter"])
    s = digest(b"c")
    for log in ls:
        hap_submit(log, s, 3)
    ls[4].rewrite(0)
    assert hap_lookup(ls[4], digest(s)) is None
    assert verify_majority(ls, s, 3)
    with pytest.raises(PermissionError):
        ls[0].rewrite(0)


def test_mirror_divergence_flags_rewrite():
    a = HapLog(make_id("h"), "rewriter")
    for t, c in enumerate([b"a", b"b", b"c"], 1):
        hap_submit(a, digest(c), t)
    mirror = HapLog(make_id("h"), records=a.records)
    assert mirror_divergence(a, mirror) is None
    a.rewrite(1, HapRecord(2, digest(b"evil")))
    assert mirror_divergence(a, mirror) == 1


def _scenario(droppers, t=3):
    ls = logs(["dropper"] * droppers + ["honest"] * (5 - droppers))
    s = prepare_submission(b"recording")
    for log in ls:
        hap_submit(log, s, t)
    return ls, s


def test_majority_thresholds():
    ls, s = _scenario(0)
    assert verify_majority(ls, s, 3)
    ls, s = _scenario(2)
    assert verify_majority(ls, s, 3)
    ls, s = _scenario(3)
    assert not verify_majority(ls, s, 3)
    assert not verify_majority(ls, s, None)


def test_majority_time_is_third_of_five():
    ls = logs(["honest"] * 5)
    s = digest(b"x")
    for log, t in zip(ls, [9, 2, 7, 4, 30]):
        hap_submit(log, s, t)
    assert majority_time(ls, s) == 7


@given(st.lists(st.integers(0, 50), min_size=1, max_size=7), st.integers(0, 60),
       st.integers(0, 60))
def test_majority_monotone(times, t1, t2):
    ls = logs(["honest"] * len(times))
    s = digest(b"m")
    for log, t in zip(ls, times):
        hap_submit(log, s, t)
    lo, hi = sorted((t1, t2))
    if verify_majority(ls, s, lo):
        assert verify_majority(ls, s, hi)


def test_log_jsonl_round_trip():
    log = HapLog(make_id("h"))
    for t in range(3):
        hap_submit(log, digest(os.urandom(8)), t)
    text = log.dumps()
    assert text.splitlines()[0].startswith('{"t":0,"v":"')
    assert HapLog.load(io.StringIO(text), make_id("h")).records == log.records


def test_service_requests():
    log = HapLog(make_id("h"))
    s = digest(b"x")
    reply = handle_request(log, {"op": "submit", "s": s.hex()}, clock=lambda: 42)
    assert reply == {"t": 42, "v": digest(s).hex()}
    assert handle_request(log, {"op": "lookup", "v": digest(s).hex()}) == {"t": 42}
    assert handle_request(log, {"op": "lookup", "v": "00" * 32}) == {"error": "not-found"}
    assert handle_request(log, {"op": "submit", "s": "zz"}) == {"error": "bad-request"}
    (dropper,) = logs(["dropper"])
    assert handle_request(dropper, {"op": "submit", "s": s.hex()}, clock=lambda: 1) is None
