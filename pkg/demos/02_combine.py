"""Several beacons, one challenge.  One honest beacon is enough."""

from tba import Beacon, TrgSource, challenge_of_record, make_faulty
from tba.core import make_id

beacons = [Beacon(make_id(f"beacon-{i}"), TrgSource.seeded(i), 3) for i in range(3)]
beacons[0] = make_faulty(beacons[0], "equivocator")
for t in range(1, 12):
    for b in beacons:
        b.step(t)

archives = {b.beacon_id: b.archive for b in beacons}
ch = challenge_of_record(10, archives)
print("challenge at t=10:", ch.value.hex())
print("contributors:", sorted(c.hex()[:8] for c in ch.contributors))
print("excluded:", [(bid.hex()[:8], why) for bid, why in ch.excluded])
