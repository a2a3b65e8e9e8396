"""Small fixtures shared by the recorder/verifier tests (no simulator)."""

from tba.beacon import Beacon, TrgSource, make_faulty
from tba.core import make_id
from tba.recorder import Recorder, SceneSource, SessionConfig
from tba.repository import HapLog


def setup(kinds=("honest", "honest", "honest"), hap_kinds=("honest",) * 5, delta=3,
          ticks=200, seed=0):
    beacons = []
    for i, kind in enumerate(kinds):
        b = Beacon(make_id(f"b{i}"), TrgSource.seeded(seed * 100 + i), delta)
        if kind != "honest":
            b = make_faulty(b, kind)
        for t in range(1, ticks + 1):
            b.step(t)
        beacons.append(b)
    logs = [HapLog(make_id(f"h{i}"), k) for i, k in enumerate(hap_kinds)]
    return beacons, logs


def record(beacons, logs, chunks=5, start=4, period=5, coupling=False, seed=0, **cfg_kw):
    cfg = SessionConfig(
        session_id=make_id(f"s{seed}"), start_time=start, chunk_period=period,
        beacon_ids=tuple(b.beacon_id for b in beacons),
        repository_ids=tuple(h.hap_id for h in logs), coupling_enabled=coupling, **cfg_kw)
    rec = Recorder(cfg, logs)
    scene = SceneSource.seeded(seed)
    audio = SceneSource.seeded(seed + 1000) if coupling else None
    archives = {b.beacon_id: b.archive for b in beacons}
    for _ in range(chunks):
        rec.record_from_archives(scene, archives, secondary=audio)
    track = SceneSource.seeded(seed + 1000).read(chunks * period * cfg.secondary_per_tick)
    return rec.finalize(), archives, track
