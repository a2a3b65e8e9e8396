import json
from dataclasses import replace

import pytest

from tba.beacon import BeaconEmission
from tba.simnet import (Knowledge, ScenarioConfig, TimeTravel, mutate_after_publication,
                        run_scenario)
from tba.verifier import AUTHENTIC, TAMPERED, verify_chain, verify_future

BASE = ScenarioConfig()

SUITE = {
    "S1": BASE,
    "S2": replace(BASE, beacons=("equivocator", "honest", "honest")),
    "S3": replace(BASE, repositories=("dropper", "dropper", "honest", "honest", "honest")),
    "S4": replace(BASE, adversary="forger"),
    "S5": replace(BASE, adversary="post-hoc-editor"),
    "S6": replace(BASE, adversary="forger", colluders=3),
}


@pytest.fixture(scope="module")
def suite():
    return {name: run_scenario(cfg) for name, cfg in SUITE.items()}


def test_security_sweep(suite):
    success = {name: r.report.adversary_success for name, r in suite.items()}
    assert success == {"S1": False, "S2": False, "S3": False, "S4": False, "S5": False,
                       "S6": True}
    for name in ("S1", "S2", "S3"):
        assert suite[name].report.verdict == AUTHENTIC
    assert suite["S4"].report.adversary_verdict == TAMPERED
    assert suite["S5"].report.adversary_verdict == TAMPERED


def test_equivocator_logged(suite):
    assert any("bad-commitment" in e for e in suite["S2"].report.fault_events)


def test_width_law(suite):
    for name in ("S1", "S3"):
        widths = {b.width for b in suite[name].report.brackets}
        assert widths == {6} and len(suite[name].report.brackets) == 10
    for period, delay in ((3, 0), (4, 2), (7, 7)):
        rep = run_scenario(replace(BASE, chunk_period=period, delay=delay, chunks=4)).report
        assert rep.verdict == AUTHENTIC
        assert {b.width for b in rep.brackets} == {period + delay}


def test_reproducible():
    cfg = replace(BASE, seed=7, coupling=True, discretion=True, adversary="forger")
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert a.report.dumps() == b.report.dumps()
    assert a.artifacts() == b.artifacts()
    assert run_scenario(replace(cfg, seed=8)).artifacts() != a.artifacts()


def test_two_leakers_of_three_still_fail():
    rep = run_scenario(replace(BASE, adversary="forger", colluders=2, seed=3)).report
    assert rep.adversary_success is False


def test_staller_gap_is_not_tampering():
    rep = run_scenario(replace(BASE, beacons=("staller", "honest", "honest"),
                               stall_ticks=(10, 20))).report
    assert rep.verdict == AUTHENTIC


def test_knowledge_refuses_early_reveals():
    k = Knowledge()
    k.learn_emission(b"b", BeaconEmission(5, bytes(32), b"x" * 32), now=5)
    assert k.reveal(b"b", 5, now=5) == b"x" * 32
    with pytest.raises(TimeTravel):
        k.learn_emission(b"b", BeaconEmission(9, bytes(32)), now=8)
    assert k.reveal(b"b", 5, now=4) is None
    k.reveals[(b"b", 7)] = (b"y" * 32, 6, False)  # a scheduler bug: reveal learned early
    with pytest.raises(TimeTravel):
        k.reveal(b"b", 7, now=7)


def test_mutation_examples(suite):
    rec, logs = suite["S1"].recording, suite["S1"].logs
    assert verify_chain(mutate_after_publication(rec, [{"op": "swap", "a": 2, "b": 3}])) == 2
    short = mutate_after_publication(rec, [{"op": "delete", "chunk": 9}])
    assert verify_chain(short) == 9
    assert any(f.status == "fail" for f in verify_future(short, logs))
    same = mutate_after_publication(rec, [])
    assert same.dumps() == rec.dumps() and same is not rec
    for bad in ([{"op": "flip", "chunk": 10}], [{"op": "swap", "a": 0, "b": 99}],
                [{"op": "flip", "chunk": 0, "offset": 10 ** 6}], [{"op": "melt"}]):
        with pytest.raises(ValueError):
            mutate_after_publication(rec, bad)


@pytest.mark.parametrize("bad", [
    {"delay": 6}, {"delay": -1}, {"chunk_period": 0}, {"adversary": "wizard"},
    {"colluders": 4}, {"beacons": ()}, {"repositories": ("honest", "evil")},
])
def test_config_rejected(bad):
    with pytest.raises(ValueError):
        run_scenario(replace(BASE, **bad))


def test_config_json_round_trip():
    cfg = replace(BASE, stall_ticks=(3,), mutations=({"op": "flip", "chunk": 1},))
    text = json.dumps(cfg.to_json())
    assert ScenarioConfig.from_json(json.loads(text)) == cfg
    with pytest.raises(ValueError):
        ScenarioConfig.from_json({"sede": 1})
