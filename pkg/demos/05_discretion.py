"""Per-segment keys that need everyone present to open."""

import random

from tba import DiscreetSession, ShareError, court_open, decrypt_ticks, reconstruct_key
from tba.core import make_id

alice, bob, carol = (make_id(n) for n in ("alice", "bob", "carol"))
presence = [(0, [alice, bob]), (4, [alice, bob, carol]), (8, [alice, bob])]
court = bytes(range(32))
session = DiscreetSession(presence, court, random.Random(0), t_end=12)

plain = b"".join(f"tick {t:02d} audio...".encode().ljust(20, b".") for t in range(12))
sealed = session.encrypt_ticks(0, plain, 20)
print("segments:", [(s.t_start, s.t_end, len(s.participants)) for s in session.segments])

middle = session.access[1]
shares = [s for s in session.shares if s.segment_id == 1]
key = reconstruct_key(shares, middle)
try:
    reconstruct_key([s for s in shares if s.participant_id != carol], middle)
except ShareError as exc:
    print("without carol:", exc)

keys = {1: key}
print("middle segment only:", decrypt_ticks([(0, sealed)], 20, keys, session.access)[80:160])
court_keys = {a.segment_id: court_open(a.escrow, a.segment_id, court, a.checksum)
              for a in session.access}
print("court opens all:", decrypt_ticks([(0, sealed)], 20, court_keys, session.access) == plain)
