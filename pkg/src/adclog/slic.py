"""Baseline shuffled-log scheme used for head-to-head comparisons.

One key chain and one position-seed chain both evolve once per event.
Each event i is stored as (ciphertext, tag, locator): the locator,
a PRF of the event index under the pre-event key, lets recovery find the entry
wherever it sits, the event is encrypted under a fresh per-event key
(AES-256-CTR, zero nonce is safe because no key is ever reused), and
the entry is swap-appended at a pseudo-random array slot so the array
order hides the event order.  Setup pads the store with dummy_count dummy
events so early real events do not cluster at the front.

The scheme keeps no separate trusted key store, so recovery accepts any
internally consistent store image -- including a stale snapshot written
back by an attacker.  The attack harness measures exactly that gap.
"""

from __future__ import annotations

import hmac
import struct
from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .logcore import MAX_MESSAGE_LEN, FormatError
from .primitives import KEY_LEN, TAG_LEN

SLIC_MAGIC = b"SLIC"
SLIC_VERSION = 1
SLIC_HEADER = SLIC_MAGIC + struct.pack(">HI", SLIC_VERSION, 0)

_DUMMY_MESSAGE = bytes(16)
_LABEL_KEY = b"SLIC/key"
_LABEL_POS_SEED = b"SLIC/pos-seed"
_LABEL_KEY_TWEAK = b"SLIC/key-tweak"
_LABEL_POS_DRAW = b"SLIC/pos"
_LABEL_POS_EVOLVE = b"SLIC/seed-evolve"
_ZERO_NONCE = bytes(16)


@dataclass(frozen=True)
class SlicInit:
    """Verifier-side secret: both chain roots, the key-evolution tweak,
    and the dummy-padding count."""

    key0: bytes
    pos_seed0: bytes
    key_tweak: bytes
    dummy_count: int


class SlicState:
    """Mutable device state: current keys, event count, and the store
    array of (ciphertext, tag, locator) entries."""

    __slots__ = ("key", "pos_seed", "count", "store", "dummy_count", "key_tweak")

    def __init__(self, key, pos_seed, dummy_count, key_tweak):
        self.key = key
        self.pos_seed = pos_seed
        self.count = 0
        self.store: list = []
        self.dummy_count = dummy_count
        self.key_tweak = key_tweak


@dataclass(frozen=True)
class SlicRecoverResult:
    """pairs is None when the store is rejected; otherwise the ordered
    (real_event_index, plaintext) pairs with dummies filtered out."""

    pairs: tuple | None

    @property
    def is_bottom(self) -> bool:
        return self.pairs is None

    @classmethod
    def bottom(cls) -> "SlicRecoverResult":
        return cls(pairs=None)


def _encrypt(key: bytes, data: bytes) -> bytes:
    enc = Cipher(algorithms.AES(key), modes.CTR(_ZERO_NONCE)).encryptor()
    return enc.update(data) + enc.finalize()


def _draw_slot(pos_seed: bytes, size: int) -> int:
    """Uniform slot in [0, size) by rejection sampling 64-bit words from
    the position chain."""
    bound = ((1 << 64) // size) * size
    counter = 0
    while True:
        digest = hmac.digest(
            pos_seed, _LABEL_POS_DRAW + counter.to_bytes(4, "big"), "sha256")
        for off in range(0, 32, 8):
            value = int.from_bytes(digest[off:off + 8], "big")
            if value < bound:
                return value % size
        counter += 1


def slic_gen(seed: bytes, dummy_count: int):
    """Initialize a device from a 32-byte seed and pad the store with
    dummy_count dummy events.  Returns (SlicState, SlicInit)."""
    if not isinstance(seed, (bytes, bytearray)) or len(seed) != KEY_LEN:
        raise ValueError("seed must be exactly 32 bytes")
    if dummy_count < 0:
        raise ValueError("dummy_count must be >= 0")
    key0 = hmac.digest(seed, _LABEL_KEY, "sha256")
    pos_seed0 = hmac.digest(seed, _LABEL_POS_SEED, "sha256")
    key_tweak = hmac.digest(seed, _LABEL_KEY_TWEAK, "sha256")
    state = SlicState(key0, pos_seed0, dummy_count, key_tweak)
    for _ in range(dummy_count):
        slic_log(state, _DUMMY_MESSAGE)
    return state, SlicInit(key0, pos_seed0, key_tweak, dummy_count)


def slic_log(state: SlicState, message: bytes) -> SlicState:
    """Append one event: locator under the old key, encrypt and tag
    under the evolved key, swap-append at a pseudo-random slot, evolve
    both chains."""
    if len(message) > MAX_MESSAGE_LEN:
        raise ValueError("message exceeds maximum length")
    i = state.count + 1
    locator = hmac.digest(state.key, i.to_bytes(8, "big"), "sha256")
    new_key = hmac.digest(state.key, state.key_tweak, "sha256")
    ct = _encrypt(new_key, message)
    tag = hmac.digest(new_key, ct, "sha256")

    slot = _draw_slot(state.pos_seed, i)
    store = state.store
    entry = (ct, tag, locator)
    if slot == len(store):
        store.append(entry)
    else:
        store.append(store[slot])
        store[slot] = entry

    state.key = new_key
    state.pos_seed = hmac.digest(state.pos_seed, _LABEL_POS_EVOLVE, "sha256")
    state.count = i
    return state


def serialize_slic_store(entries) -> bytes:
    parts = [SLIC_HEADER]
    for ct, tag, locator in entries:
        parts.append(struct.pack(">I", len(ct)))
        parts.append(ct)
        parts.append(tag)
        parts.append(locator)
    return b"".join(parts)


def parse_slic_store(data: bytes):
    """Parse a store image into ([(ct, tag, locator), ...], trailing_garbage)."""
    if len(data) < len(SLIC_HEADER) or data[:4] != SLIC_MAGIC:
        raise FormatError("bad store magic")
    version = struct.unpack_from(">H", data, 4)[0]
    if version != SLIC_VERSION:
        raise FormatError(f"unsupported store version {version}")
    entries = []
    view = memoryview(data)
    offset = len(SLIC_HEADER)
    end = len(data)
    while offset < end:
        if offset + 4 > end:
            return entries, True
        (ct_len,) = struct.unpack_from(">I", view, offset)
        if ct_len > MAX_MESSAGE_LEN:
            return entries, True
        rec_end = offset + 4 + ct_len + TAG_LEN + KEY_LEN
        if rec_end > end:
            return entries, True
        ct = bytes(view[offset + 4:offset + 4 + ct_len])
        tag = bytes(view[offset + 4 + ct_len:offset + 4 + ct_len + TAG_LEN])
        locator = bytes(view[rec_end - KEY_LEN:rec_end])
        entries.append((ct, tag, locator))
        offset = rec_end
    return entries, False


def slic_recover(store_bytes: bytes, init: SlicInit, cs: int):
    """Replay the key chain against the store image.

    Every entry is found by its locator and checked under the matching
    per-event key.  The image is rejected only when an event older than
    the trailing cs allowance is missing or fails its tag -- which means
    a stale-but-consistent snapshot of the whole store passes.
    """
    try:
        entries, _ = parse_slic_store(store_bytes)
    except FormatError:
        return SlicRecoverResult.bottom()
    n_entries = len(entries)
    if n_entries == 0:
        return SlicRecoverResult.bottom()

    by_locator = {locator: (ct, tag) for ct, tag, locator in entries}
    verified: dict[int, bytes] = {}
    key = init.key0
    for i in range(1, n_entries + cs + 1):
        locator = hmac.digest(key, i.to_bytes(8, "big"), "sha256")
        key = hmac.digest(key, init.key_tweak, "sha256")
        hit = by_locator.get(locator)
        if hit is None:
            continue
        ct, tag = hit
        if hmac.compare_digest(tag, hmac.digest(key, ct, "sha256")):
            verified[i] = _encrypt(key, ct)

    horizon = n_entries - cs
    if any(i not in verified for i in range(1, horizon + 1)):
        return SlicRecoverResult.bottom()
    pairs = tuple((i - init.dummy_count, verified[i])
                  for i in sorted(verified) if i > init.dummy_count)
    return SlicRecoverResult(pairs=pairs)
