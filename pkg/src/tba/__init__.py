"""Time-bracketed authentication: beacons, hash-and-publish logs, recorder, verifier."""

from .beacon import Archive, Beacon, BeaconEmission, TrgSource, make_faulty, verify_emission
from .combiner import Challenge, challenge_of_record, combine_challenge
from .core import ChainHead, Chunk, canonical_chunk_bytes, chain_extend, digest, truncate_hex64
from .discretion import (DiscreetSession, ShareError, court_escrow, court_open, decrypt_ticks,
                         reconstruct_key, split_key)
from .recorder import Recorder, Recording, SceneSource, SessionConfig
from .repository import HapLog, HapRecord, majority_time, prepare_submission, verify_majority
from .simnet import ScenarioConfig, mutate_after_publication, run_scenario
from .verifier import bracket_report

__all__ = [
    "Archive", "Beacon", "BeaconEmission", "TrgSource", "make_faulty", "verify_emission",
    "Challenge", "challenge_of_record", "combine_challenge",
    "ChainHead", "Chunk", "canonical_chunk_bytes", "chain_extend", "digest", "truncate_hex64",
    "DiscreetSession", "ShareError", "court_escrow", "court_open", "decrypt_ticks",
    "reconstruct_key", "split_key",
    "Recorder", "Recording", "SceneSource", "SessionConfig",
    "HapLog", "HapRecord", "majority_time", "prepare_submission", "verify_majority",
    "ScenarioConfig", "mutate_after_publication", "run_scenario",
    "bracket_report",
]

__version__ = "0.1.0"
