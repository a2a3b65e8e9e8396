"""Hash-and-publish logs and the strict-majority rule."""

from tba import HapLog, majority_time, verify_majority
from tba.core import digest, make_id

head = digest(b"some chain head")
logs = [HapLog(make_id(f"hap-{i}"), "dropper" if i < 2 else "honest") for i in range(5)]
for i, log in enumerate(logs):
    log.submit(head, 20 + i)  # logs receive it at slightly different ticks

print("published value:", digest(head).hex()[:16], "(hash of the submission)")
print("held by a majority:", verify_majority(logs, head))
print("majority time:", majority_time(logs, head))

logs.append(HapLog(make_id("hap-5"), "dropper"))
print("with 3 of 6 silent:", verify_majority(logs, head))
