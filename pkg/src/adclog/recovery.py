"""Log recovery: key-schedule reconstruction and plausibility checking.

The verifier holds the initial state and replays both key chains over
the claimed log plus one cache window beyond it.  A log survives only
if the key store holds a candidate key, at least one record verifies,
and nothing older than one cache window is missing or forged.
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass
from typing import Iterator, NamedTuple

from .logcore import FormatError, InitialState, LogConfig, parse_kstore, parse_lstore
from .primitives import CfVariant, uniform_window_offset

import hashlib


class ScheduleEntry(NamedTuple):
    index: int
    key: bytes
    randomizer: bytes | None


@dataclass(frozen=True)
class KeySchedule:
    """Per-index verification keys for ordinals 1..n'+cs."""

    entries: tuple

    def __getitem__(self, index: int) -> ScheduleEntry:
        return self.entries[index - 1]

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class CandidateKeySet:
    """State-controlled keys an honest device could plausibly hold after
    a crash at claimed length n_prime: the last one evolved at or before
    n_prime plus every one evolved within the next cache window."""

    keys: frozenset
    n_prime: int
    cs: int


@dataclass(frozen=True)
class RecoverResult:
    n_prime: int
    pairs: tuple | None
    expendable: tuple

    @property
    def is_bottom(self) -> bool:
        return self.pairs is None

    @classmethod
    def bottom(cls, n_prime: int = 0) -> "RecoverResult":
        return cls(n_prime=n_prime, pairs=None,
                   expendable=expendable_set(n_prime, 0))


def expendable_set(n_prime: int, cs: int) -> tuple:
    """Closed interval [lo, hi] of ordinals a normal crash may cost.
    Empty (lo > hi) when cs == 0."""
    return (max(1, n_prime - cs + 1), n_prime + cs)


def _iter_schedule(init: InitialState, upto: int,
                   config: LogConfig) -> Iterator[ScheduleEntry]:
    """Replay both chains over ordinals 1..upto, yielding for each index
    the tag key and, where the state-controlled key evolved, the prior
    key that randomized the tag."""
    sha256 = hashlib.sha256
    digest = hmac.digest
    seq_tweak = init.seq_tweak
    sc_tweak = init.sc_tweak
    m = config.m
    seq = init.seq_root
    sc = init.sc_root
    if config.variant is CfVariant.HASH:
        threshold = (1 << 256) // m
        for i in range(1, upto + 1):
            seq = digest(seq, seq_tweak, "sha256")
            h = sha256(sc + i.to_bytes(8, "big")).digest()
            if int.from_bytes(h, "big") < threshold:
                prior = sc
                sc = digest(sc, sc_tweak, "sha256")
                yield ScheduleEntry(i, sc, prior)
            else:
                yield ScheduleEntry(i, seq, None)
    else:
        fire_pos = None
        for i in range(1, upto + 1):
            seq = digest(seq, seq_tweak, "sha256")
            window, pos = divmod(i - 1, m)
            if pos == 0:
                fire_pos = uniform_window_offset(sc, window, m)
            if pos == fire_pos:
                prior = sc
                sc = digest(sc, sc_tweak, "sha256")
                yield ScheduleEntry(i, sc, prior)
            else:
                yield ScheduleEntry(i, seq, None)


def reconstruct_keys(init: InitialState, n_prime: int,
                     config: LogConfig) -> tuple:
    """Build the key schedule for ordinals 1..n_prime+cs together with
    the candidate key set for a log of claimed length n_prime."""
    entries = []
    candidates = set()
    current_sc = init.sc_root
    for entry in _iter_schedule(init, n_prime + config.cs, config):
        entries.append(entry)
        if entry.randomizer is not None:
            if entry.index > n_prime:
                candidates.add(entry.randomizer)
            current_sc = entry.key
    candidates.add(current_sc)
    schedule = KeySchedule(tuple(entries))
    return schedule, CandidateKeySet(frozenset(candidates), n_prime, config.cs)


def recover(lstore_bytes: bytes, kstore_bytes: bytes, init: InitialState,
            config: LogConfig) -> RecoverResult:
    """Recover and judge a post-crash log.

    Returns the verified (ordinal, message) pairs plus the expendable
    interval, or bottom when the state is implausible: the key store is
    missing/corrupt/holding a non-candidate key, nothing verifies, or a
    record older than one cache window fails.
    """
    try:
        records, _partial = parse_lstore(lstore_bytes)
        kstore = parse_kstore(kstore_bytes)
    except FormatError:
        return RecoverResult.bottom()

    n_prime = len(records)
    if kstore is None:
        return RecoverResult.bottom(n_prime)

    cs = config.cs
    digest = hmac.digest
    pairs = []
    oldest_failure = None
    candidates = set()
    current_sc = init.sc_root

    for entry in _iter_schedule(init, n_prime + cs, config):
        i = entry.index
        randomizer = entry.randomizer
        if randomizer is not None:
            if i > n_prime:
                candidates.add(randomizer)
            current_sc = entry.key
        if i <= n_prime:
            message, tag = records[i - 1]
            if randomizer is None:
                expect = digest(entry.key, message, "sha256")
            else:
                expect = digest(entry.key, message + randomizer, "sha256")
            if hmac.compare_digest(expect, tag):
                pairs.append((i, message))
            elif oldest_failure is None:
                oldest_failure = i
    candidates.add(current_sc)

    if kstore.sc_key not in candidates:
        return RecoverResult.bottom(n_prime)
    if len(pairs) < 1:
        return RecoverResult.bottom(n_prime)
    if oldest_failure is not None and oldest_failure <= n_prime - cs:
        return RecoverResult.bottom(n_prime)
    return RecoverResult(n_prime=n_prime, pairs=tuple(pairs),
                         expendable=expendable_set(n_prime, cs))
