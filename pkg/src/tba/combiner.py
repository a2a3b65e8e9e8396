"""XOR several beacons' verified reveals into one challenge."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .beacon import Archive, BeaconEmission, GapError, verify_emission
from .core import xor_bytes

BAD_COMMITMENT = "bad-commitment"
GAP = "gap"
NO_REVEAL = "no-reveal"


class NoTrustworthyChallenge(RuntimeError):
    """Every configured beacon was excluded at this tick."""


class InsufficientArchive(LookupError):
    """An archive does not reach the requested tick at all."""


@dataclass(frozen=True)
class Challenge:
    t: int
    value: bytes
    contributors: frozenset
    excluded: tuple = ()  # sorted (beacon_id, reason) pairs

    def excluded_reasons(self) -> dict:
        return dict(self.excluded)


def _exclusion(emission: Optional[BeaconEmission], archive: Archive, t: int) -> Optional[str]:
    if emission is None:
        return GAP
    if emission.reveal is None:
        return NO_REVEAL
    try:
        ok = verify_emission(archive, t)
    except GapError:
        return GAP
    return None if ok else BAD_COMMITMENT


def combine_challenge(emissions: Mapping[bytes, Optional[BeaconEmission]],
                      archives: Mapping[bytes, Archive], t: Optional[int] = None) -> Challenge:
    """Combine the beacons' emissions at one tick.

    ``emissions`` maps each configured beacon id to its emission at ``t``
    (None for a beacon that emitted nothing).  Beacons whose reveal fails
    its commitment, or that have no reveal or a gap, are left out of the
    XOR for this tick only.
    """
    times = {e.t for e in emissions.values() if e is not None}
    if t is None:
        if len(times) != 1:
            raise ValueError("emissions must share exactly one timestamp")
        t = times.pop()
    elif times - {t}:
        raise ValueError("emission timestamps differ from t")

    contributors = []
    excluded = []
    for beacon_id in sorted(emissions):
        emission = emissions[beacon_id]
        reason = _exclusion(emission, archives[beacon_id], t)
        if reason is None:
            contributors.append(beacon_id)
        else:
            excluded.append((beacon_id, reason))

    if not contributors:
        raise NoTrustworthyChallenge(f"all {len(emissions)} beacons excluded at t={t}")
    reveals = [emissions[b].reveal for b in contributors]
    if len({len(r) for r in reveals}) != 1:
        raise ValueError("contributing beacons disagree on challenge width")
    return Challenge(t, xor_bytes(*reveals), frozenset(contributors), tuple(excluded))


def challenge_of_record(t: int, archives: Mapping[bytes, Archive]) -> Challenge:
    """Recompute, from archived data alone, the challenge a recorder saw at ``t``."""
    for beacon_id, archive in archives.items():
        if not archive.covers(t):
            raise InsufficientArchive(f"archive {beacon_id.hex()} does not reach t={t}")
    return combine_challenge({b: a.at(t) for b, a in archives.items()}, archives, t)
