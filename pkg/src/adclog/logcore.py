"""Device-side logging engine and the on-disk formats.

A device keeps two evolving keys: the sequential key steps forward on
every event, the state-controlled key steps only where the choice
function fires (expected once per m events).  Records are written
through a bounded write-behind cache so a crash can lose at most the
cached tail.

On-disk layout (all integers big-endian):

  LStore        "ADCL" | version u16 | reserved u32 | records
  record        msg_len u32 | msg | tag (32 bytes)
  KStore        "ADCK" | version u16 | seq_key 32B | sc_key 32B |
                seq_index u64 | sc_epoch u64
  InitialState  "ADCI" | version u16 | seq_root 32B | seq_root' 32B | seq_tweak 32B |
                seq_tweak' 32B | msg_len u32 | init_message
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass, field

from .primitives import KEY_LEN, TAG_LEN, CfParams, CfVariant, uniform_window_offset

LSTORE_MAGIC = b"ADCL"
KSTORE_MAGIC = b"ADCK"
INITSTATE_MAGIC = b"ADCI"
FORMAT_VERSION = 1
LSTORE_HEADER = LSTORE_MAGIC + struct.pack(">HI", FORMAT_VERSION, 0)
KSTORE_LEN = 4 + 2 + KEY_LEN + KEY_LEN + 8 + 8

INIT_PREFIX = b"ADCL-INIT"
MAX_MESSAGE_LEN = 1 << 20

_LABEL_SEQ_KEY = b"ADCL/seq-key"
_LABEL_SC_KEY = b"ADCL/sc-key"
_LABEL_SEQ_TWEAK = b"ADCL/seq-tweak"
_LABEL_SC_TWEAK = b"ADCL/sc-tweak"
_LABEL_DEVICE_ID = b"ADCL/device-id"


class FormatError(ValueError):
    """A stored artifact does not parse under the declared layout."""


@dataclass(frozen=True)
class LogConfig:
    """Public logging parameters: evolution interval m, cache capacity cs,
    and which choice-function variant drives the state-controlled key."""

    m: int = 1 << 14
    cs: int = 1 << 14
    variant: CfVariant = CfVariant.HASH

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.cs < 0:
            raise ValueError("cs must be >= 0")

    def cf_params(self) -> CfParams:
        return CfParams(self.variant, self.m)


@dataclass
class KStoreState:
    seq_key: bytes
    sc_key: bytes
    seq_index: int
    sc_epoch: int


@dataclass
class CacheState:
    pending: list = field(default_factory=list)
    key_update_in_flight: tuple | None = None


@dataclass(frozen=True)
class InitialState:
    """Verifier-side secret: both chain roots, both tweaks, and the
    initialization message logged as record 1."""

    seq_root: bytes
    sc_root: bytes
    seq_tweak: bytes
    sc_tweak: bytes
    init_message: bytes


class DeviceState:
    """Mutable logging-device state.  log_event updates it in place."""

    __slots__ = (
        "kstore", "records", "cache", "config", "seq_tweak", "sc_tweak",
        "sc_fired", "sink", "retain_records", "flushed_count",
        "_window_fired", "_threshold", "_is_hash", "_m", "_cs",
    )

    def __init__(self, kstore: KStoreState, config: LogConfig,
                 seq_tweak: bytes, sc_tweak: bytes, *,
                 sink=None, retain_records: bool = True):
        self.kstore = kstore
        self.records: list = []
        self.cache = CacheState()
        self.config = config
        self.seq_tweak = seq_tweak
        self.sc_tweak = sc_tweak
        self.sc_fired: list = []
        self.sink = sink
        self.retain_records = retain_records
        self.flushed_count = 0
        self._m = config.m
        self._cs = config.cs
        self._is_hash = config.variant is CfVariant.HASH
        self._threshold = (1 << 256) // config.m
        self._window_fired = _window_fired_from(kstore, config.m)


def _window_fired_from(kstore: KStoreState, m: int) -> bool:
    """Whether the window containing the last processed index has already
    seen its state-controlled evolution.  Under the uniform variant every
    completed window fired exactly once, so the epoch count tells us."""
    if kstore.seq_index == 0:
        return False
    window = (kstore.seq_index - 1) // m
    return kstore.sc_epoch > window


def _derive(seed: bytes, label: bytes) -> bytes:
    return hmac.digest(seed, label, "sha256")


def gen(seed: bytes, config: LogConfig, *,
        created_at: int = 0, device_id: bytes | None = None,
        sink=None, retain_records: bool = True):
    """Initialize a device from a 32-byte seed.

    Derives both chain roots and both public tweaks by domain-separated
    PRF calls on the seed, then logs the initialization record (ordinal 1)
    and flushes it, so an empty log file can never pass for a fresh one.
    Returns (DeviceState, InitialState).  Deterministic for a fixed seed,
    created_at, and device_id.
    """
    if not isinstance(seed, (bytes, bytearray)) or len(seed) != KEY_LEN:
        raise ValueError("seed must be exactly 32 bytes")
    if device_id is None:
        device_id = _derive(seed, _LABEL_DEVICE_ID)[:16]
    if len(device_id) != 16:
        raise ValueError("device_id must be 16 bytes")

    seq_root = _derive(seed, _LABEL_SEQ_KEY)
    sc_root = _derive(seed, _LABEL_SC_KEY)
    seq_tweak = _derive(seed, _LABEL_SEQ_TWEAK)
    sc_tweak = _derive(seed, _LABEL_SC_TWEAK)

    init_message = INIT_PREFIX + created_at.to_bytes(8, "big") + device_id
    kstore = KStoreState(seq_key=seq_root, sc_key=sc_root, seq_index=0, sc_epoch=0)
    state = DeviceState(kstore, config, seq_tweak, sc_tweak,
                        sink=sink, retain_records=retain_records)
    if sink is not None:
        sink.write(LSTORE_HEADER)
    log_event(state, init_message)
    flush(state)
    init = InitialState(seq_root, sc_root, seq_tweak, sc_tweak, init_message)
    return state, init


def log_event(state: DeviceState, message: bytes) -> DeviceState:
    """Append one event: evolve the sequential key, consult the choice
    function, tag the message, stage the record in the cache."""
    if len(message) > MAX_MESSAGE_LEN:
        raise ValueError("message exceeds maximum length")

    ks = state.kstore
    i = ks.seq_index + 1
    seq_key = hmac.digest(ks.seq_key, state.seq_tweak, "sha256")

    sc_key = ks.sc_key
    if state._is_hash:
        digest = hashlib.sha256(sc_key + i.to_bytes(8, "big")).digest()
        fired = int.from_bytes(digest, "big") < state._threshold
    else:
        window, pos = divmod(i - 1, state._m)
        if pos == 0:
            state._window_fired = False
        if state._window_fired:
            fired = False
        else:
            fired = pos == uniform_window_offset(sc_key, window, state._m)
            if fired:
                state._window_fired = True

    if fired:
        new_sc = hmac.digest(sc_key, state.sc_tweak, "sha256")
        tag = hmac.digest(new_sc, message + sc_key, "sha256")
        ks.sc_key = new_sc
        ks.sc_epoch += 1
        state.cache.key_update_in_flight = (sc_key, new_sc)
        state.sc_fired.append(i)
    else:
        tag = hmac.digest(seq_key, message, "sha256")

    ks.seq_key = seq_key
    ks.seq_index = i
    pending = state.cache.pending
    pending.append((message, tag))
    if len(pending) >= state._cs:
        flush(state)
    return state


def flush(state: DeviceState) -> None:
    """Drain the write-behind cache to the log store.  Completing the
    flush also completes any state-controlled key update that was in
    flight, erasing the retained prior key."""
    pending = state.cache.pending
    if pending:
        if state.sink is not None:
            state.sink.write(b"".join(
                struct.pack(">I", len(m)) + m + t for m, t in pending))
        if state.retain_records:
            state.records.extend(pending)
        state.flushed_count += len(pending)
        state.cache.pending = []
    state.cache.key_update_in_flight = None


def serialize_lstore(records) -> bytes:
    """Full log-store image: header plus length-prefixed tagged records."""
    parts = [LSTORE_HEADER]
    for message, tag in records:
        parts.append(struct.pack(">I", len(message)))
        parts.append(message)
        parts.append(tag)
    return b"".join(parts)


def parse_lstore(data: bytes):
    """Parse a log-store image into ([(message, tag), ...], trailing_garbage).

    A record cut short (crash mid-write) is dropped and flagged rather
    than treated as structural corruption; bad magic or version raises
    FormatError.
    """
    if len(data) < len(LSTORE_HEADER) or data[:4] != LSTORE_MAGIC:
        raise FormatError("bad log store magic")
    version = struct.unpack_from(">H", data, 4)[0]
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported log store version {version}")
    records = []
    view = memoryview(data)
    offset = len(LSTORE_HEADER)
    end = len(data)
    while offset < end:
        if offset + 4 > end:
            return records, True
        (msg_len,) = struct.unpack_from(">I", view, offset)
        if msg_len > MAX_MESSAGE_LEN:
            return records, True
        rec_end = offset + 4 + msg_len + TAG_LEN
        if rec_end > end:
            return records, True
        records.append((bytes(view[offset + 4:offset + 4 + msg_len]),
                        bytes(view[rec_end - TAG_LEN:rec_end])))
        offset = rec_end
    return records, False


def serialize_kstore(kstore: KStoreState) -> bytes:
    return (KSTORE_MAGIC + struct.pack(">H", FORMAT_VERSION)
            + kstore.seq_key + kstore.sc_key
            + struct.pack(">QQ", kstore.seq_index, kstore.sc_epoch))


def parse_kstore(data: bytes) -> KStoreState | None:
    """Parse a key-store image.  Absent or all-zero content parses as
    Empty (None), modeling key loss; structural damage raises."""
    if len(data) == 0 or not any(data):
        return None
    if len(data) != KSTORE_LEN:
        raise FormatError("bad key store length")
    if data[:4] != KSTORE_MAGIC:
        raise FormatError("bad key store magic")
    version = struct.unpack_from(">H", data, 4)[0]
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported key store version {version}")
    seq_key = data[6:38]
    sc_key = data[38:70]
    seq_index, sc_epoch = struct.unpack_from(">QQ", data, 70)
    return KStoreState(seq_key, sc_key, seq_index, sc_epoch)


def serialize_initial_state(init: InitialState) -> bytes:
    return (INITSTATE_MAGIC + struct.pack(">H", FORMAT_VERSION)
            + init.seq_root + init.sc_root + init.seq_tweak + init.sc_tweak
            + struct.pack(">I", len(init.init_message)) + init.init_message)


def parse_initial_state(data: bytes) -> InitialState:
    header_len = 6 + 4 * KEY_LEN + 4
    if len(data) < header_len or data[:4] != INITSTATE_MAGIC:
        raise FormatError("bad initial state magic")
    version = struct.unpack_from(">H", data, 4)[0]
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported initial state version {version}")
    off = 6
    seq_root = data[off:off + 32]; off += 32
    sc_root = data[off:off + 32]; off += 32
    seq_tweak = data[off:off + 32]; off += 32
    sc_tweak = data[off:off + 32]; off += 32
    (msg_len,) = struct.unpack_from(">I", data, off)
    off += 4
    if len(data) != off + msg_len:
        raise FormatError("initial state length mismatch")
    return InitialState(seq_root, sc_root, seq_tweak, sc_tweak, data[off:])
