"""Record a few chunks against live archives, then verify and tamper."""

from tba import (Beacon, HapLog, Recorder, SceneSource, SessionConfig, TrgSource,
                 bracket_report, mutate_after_publication)
from tba.core import make_id

beacons = [Beacon(make_id(f"beacon-{i}"), TrgSource.seeded(i), 3) for i in range(3)]
for t in range(1, 40):
    for b in beacons:
        b.step(t)
archives = {b.beacon_id: b.archive for b in beacons}
logs = [HapLog(make_id(f"hap-{i}")) for i in range(5)]

cfg = SessionConfig(make_id("demo"), start_time=4, chunk_period=5,
                    beacon_ids=tuple(archives), repository_ids=tuple(h.hap_id for h in logs))
recorder = Recorder(cfg, logs)
scene = SceneSource.seeded(42)
for _ in range(5):
    recorder.record_from_archives(scene, archives)
rec = recorder.finalize()

report = bracket_report(rec, archives, logs)
print("verdict:", report.verdict)
for b in report.brackets:
    print(f"  chunk {b.chunk_index}: made in [{b.t_past}, {b.t_future}]")

edited = mutate_after_publication(rec, [{"op": "flip", "chunk": 2, "offset": 17}])
print("after flipping one byte:", bracket_report(edited, archives, logs).verdict)
print("without the archives:", bracket_report(rec, {}, logs).verdict)
