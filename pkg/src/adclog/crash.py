"""Crash and fault-injection model for the logging device.

A normal crash interrupts the device mid-event: a bounded tail of
records (cached writes still in OS buffers) is lost, the record at the
cut may be left half-written, and each key-store update that was in
flight is lost independently with probability alpha.  The sequential
key update is in flight at every event; the state-controlled update is
in flight only when the choice function fired at the interrupted event,
which happens at rate 1/m.  Both keys are therefore lost together with
probability alpha^2 / m, which stability_estimate checks by Monte
Carlo.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass

from .logcore import (
    DeviceState,
    KStoreState,
    LogConfig,
    gen,
    log_event,
    serialize_kstore,
    serialize_lstore,
)
from .primitives import KEY_LEN

_ZERO_KEY = bytes(KEY_LEN)


@dataclass(frozen=True)
class CrashParams:
    """Fault-injection knobs: per-update key-loss probability alpha and
    the write-behind budget cs bounding how many trailing records a
    crash can take."""

    alpha: float
    cs: int
    rng_seed: int

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.cs < 0:
            raise ValueError("cs must be >= 0")


@dataclass(frozen=True)
class CrashedState:
    """What survives on disk after a crash: the (possibly clipped) log
    store image and the (possibly key-less) key store image."""

    lstore_bytes: bytes
    kstore_bytes: bytes


@dataclass(frozen=True)
class StabilityReport:
    trials: int
    both_lost: int
    empirical: float
    theoretical: float
    alpha: float
    m: int


def normal_crash(state: DeviceState, params: CrashParams) -> CrashedState:
    """Simulate a crash of a running device.  The input state is not
    modified; the returned images are what a verifier would find.

    Trailing-record loss: d is uniform over [0, min(cs, losable)] where
    losable counts every record except the initialization record, which
    is written synchronously at setup and cannot be taken by a crash.
    With probability 1/2 a nonzero cut additionally leaves the first
    dropped record half-written (the frame the device was flushing when
    power went out), so the total rollback never exceeds d records.
    """
    rng = random.Random(params.rng_seed)
    all_records = state.records + state.cache.pending
    losable = len(state.cache.pending) + max(0, len(state.records) - 1)
    d = rng.randint(0, min(params.cs, losable))
    survivors = all_records[: len(all_records) - d] if d else all_records

    lstore_bytes = serialize_lstore(survivors)
    if d > 0 and rng.random() < 0.5:
        message, tag = all_records[len(all_records) - d]
        frame = struct.pack(">I", len(message)) + message + tag
        cut = rng.randint(1, len(frame) - 1)
        lstore_bytes += frame[:cut]

    ks = state.kstore
    seq_key, sc_key = ks.seq_key, ks.sc_key
    sc_in_flight = bool(state.sc_fired) and state.sc_fired[-1] == ks.seq_index
    if sc_in_flight and rng.random() < params.alpha:
        sc_key = _ZERO_KEY
    if ks.seq_index >= 1 and rng.random() < params.alpha:
        seq_key = _ZERO_KEY

    crashed_kstore = KStoreState(seq_key, sc_key, ks.seq_index, ks.sc_epoch)
    return CrashedState(lstore_bytes, serialize_kstore(crashed_kstore))


def stability_estimate(config: LogConfig, params: CrashParams,
                       trials: int) -> StabilityReport:
    """Monte-Carlo estimate of the probability that one crash destroys
    both keys, against the closed form alpha^2 / m.

    Each trial boots a fresh device, logs a uniformly chosen number of
    events (1 to 3m, so crash points hit every window position), and
    crashes it.  Requires at least 1000 trials for the estimate to mean
    anything.
    """
    if trials < 1000:
        raise ValueError("stability_estimate needs at least 1000 trials")
    master = random.Random(params.rng_seed)
    span = max(1, 3 * config.m)
    key_lo = 6
    key_hi = 6 + 2 * KEY_LEN
    zeros = bytes(2 * KEY_LEN)
    both_lost = 0
    for _ in range(trials):
        seed = master.randbytes(KEY_LEN)
        n_events = master.randint(1, span)
        crash_seed = master.getrandbits(64)
        state, _ = gen(seed, config)
        for _ in range(n_events):
            log_event(state, b"s")
        crashed = normal_crash(
            state, CrashParams(params.alpha, params.cs, crash_seed))
        if crashed.kstore_bytes[key_lo:key_hi] == zeros:
            both_lost += 1
    theoretical = params.alpha * params.alpha / config.m
    return StabilityReport(trials=trials, both_lost=both_lost,
                           empirical=both_lost / trials,
                           theoretical=theoretical,
                           alpha=params.alpha, m=config.m)
