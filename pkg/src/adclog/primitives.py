"""Keyed primitives for the double-evolving-key log.

Both key chains evolve through HMAC-SHA-256 used as a PRF; record tags
are HMAC-SHA-256 as well.  The choice function that decides where the
state-controlled key evolves comes in two flavors: a hash-threshold
test firing independently at rate 1/m, and a windowed variant firing
exactly once per m consecutive indices at a uniform offset.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field
from enum import Enum

KEY_LEN = 32
TAG_LEN = 32

_UNIFORM_LABEL = b"ADCL/cf-uniform"


class CfVariant(Enum):
    HASH = "hash"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class CfParams:
    """Choice-function configuration.

    m is the expected evolution interval: the hash variant fires a given
    index with probability floor(2^256/m)/2^256, the uniform variant
    fires exactly one index per window of m.
    """

    variant: CfVariant
    m: int
    threshold: int = field(init=False)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        object.__setattr__(self, "threshold", (1 << 256) // self.m)


def _check_key(key: bytes, name: str = "key") -> None:
    if not isinstance(key, (bytes, bytearray)) or len(key) != KEY_LEN:
        raise ValueError(f"{name} must be exactly {KEY_LEN} bytes")


def evolve_key(key: bytes, tweak: bytes) -> bytes:
    """Derive the next key in a chain: HMAC-SHA-256(key, tweak).

    One-way, so compromising the current key reveals nothing about
    earlier chain values.
    """
    _check_key(key)
    _check_key(tweak, "tweak")
    return hmac.digest(key, tweak, "sha256")


def compute_tag(key: bytes, message: bytes, randomizer: bytes | None = None) -> bytes:
    """Authentication tag for a record.

    Plain records are tagged under the per-event sequential key.  Records
    written where the state-controlled key evolved are tagged under the
    fresh state-controlled key with the prior one appended to the message
    (no separator), which makes those tags unrecognizable without the
    prior key.
    """
    _check_key(key)
    if randomizer is None:
        return hmac.digest(key, message, "sha256")
    _check_key(randomizer, "randomizer")
    return hmac.digest(key, message + randomizer, "sha256")


def cf_hash(sc_key: bytes, index: int, params: CfParams) -> bool:
    """Hash-threshold choice function.

    Fires when SHA-256(sc_key || index as 8-byte big-endian), read as a
    big-endian 256-bit integer, falls below floor(2^256 / m).
    """
    digest = hashlib.sha256(sc_key + index.to_bytes(8, "big")).digest()
    return int.from_bytes(digest, "big") < params.threshold


def uniform_window_offset(window_key: bytes, window: int, m: int) -> int:
    """Offset in {0..m-1} at which window `window` fires, derived from the
    key held at window start.  Rejection sampling keeps it unbiased."""
    bound = ((1 << 64) // m) * m
    counter = 0
    while True:
        stream = hmac.digest(
            window_key,
            _UNIFORM_LABEL + window.to_bytes(8, "big") + counter.to_bytes(4, "big"),
            "sha256",
        )
        for off in range(0, 32, 8):
            value = int.from_bytes(stream[off:off + 8], "big")
            if value < bound:
                return value % m
        counter += 1


def cf_uniform(window_key: bytes, index: int, params: CfParams) -> bool:
    """Windowed choice function: exactly one index fires in each window
    [w*m+1, (w+1)*m], at an offset derived from the key held when the
    window started.  The caller is responsible for passing that key for
    every index of the window.
    """
    m = params.m
    window, pos = divmod(index - 1, m)
    return pos == uniform_window_offset(window_key, window, m)
