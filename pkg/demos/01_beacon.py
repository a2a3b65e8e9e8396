"""A precommitting beacon: commitments now, reveals delta ticks later."""

from tba import Beacon, TrgSource, make_faulty, verify_emission
from tba.core import make_id

beacon = Beacon(make_id("demo-beacon"), TrgSource.seeded(1), delta=3)
for t in range(1, 9):
    e = beacon.step(t)
    reveal = "-" * 16 if e.reveal is None else e.reveal.hex()[:16]
    print(f"t={t}  commit={e.commitment.hex()[:16]}  reveal={reveal}")

print("honest reveals check out:",
      all(verify_emission(beacon.archive, t) for t in range(4, 9)))

liar = make_faulty(Beacon(make_id("liar"), TrgSource.seeded(2), 3), "equivocator")
for t in range(1, 9):
    liar.step(t)
print("equivocator caught at every tick:",
      not any(verify_emission(liar.archive, t) for t in range(4, 9)))
