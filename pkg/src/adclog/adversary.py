"""Attack harness: runs tampering strategies against real scheme code
and compares empirical acceptance rates with the closed-form bounds.

The truncation game models an attacker who compromises the device,
keeps a genuine log prefix, and presents the hardware key store as
found.  The attacker cannot steer which evolution epoch the store sits
in, so the held key occupies one of cs//m + 1 slots uniformly (the
newest slot, or one of the up-to-cs//m epochs the verifier will never
replay).  Acceptance additionally requires that the newest key is
reachable from the kept prefix -- no evolution within the final ell
events -- giving

    bound_truncate(m, cs, ell) = (1 - 1/m)^ell / (cs//m + 1).

Every trial builds a real device, doctors real store images, and runs
the real recovery procedure; nothing is stubbed.
"""

from __future__ import annotations

import hmac
import json
import math
import random
from dataclasses import asdict, dataclass
from typing import ClassVar

from .logcore import (
    LSTORE_HEADER,
    KStoreState,
    LogConfig,
    flush,
    gen,
    log_event,
    serialize_kstore,
    serialize_lstore,
)
from .primitives import CfVariant
from .recovery import recover
from .slic import (
    SLIC_HEADER,
    serialize_slic_store,
    slic_gen,
    slic_log,
    slic_recover,
)

DEFAULT_EPS_PRF = 2.0 ** -128


def bound_truncate(m: int, cs: int, ell: int) -> float:
    """Closed-form acceptance bound for truncation with a kept key:
    (1 - 1/m)^ell / (cs//m + 1)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if cs < 0:
        raise ValueError("cs must be >= 0")
    if ell < 0:
        raise ValueError("ell must be >= 0")
    return (1.0 - 1.0 / m) ** ell / (cs // m + 1)


def bound_uniform(m: int, cs: int, ell: int) -> float:
    """Acceptance bound under the one-evolution-per-window variant:
    (m - ell) / (m + cs), hitting exactly zero once the cut spans a
    whole window.  Needs a cache budget larger than the window."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if ell < 0:
        raise ValueError("ell must be >= 0")
    if cs <= m:
        raise ValueError("cache budget must exceed the window size")
    if ell >= m:
        return 0.0
    return (m - ell) / (m + cs)


def acceptance_envelope(variant: CfVariant, *, m: int, cs: int, n: int, n_prime: int,
              eps_prf: float = DEFAULT_EPS_PRF) -> float:
    """Acceptance envelope for a doctored log claiming n_prime of n
    events.  Zero when nothing is recovered; otherwise the truncation
    bound at the implied cut depth, floored at the PRF advantage for
    the hash-driven variant."""
    if n_prime < 1:
        return 0.0
    ell = max(0, n - cs - n_prime)
    if variant is CfVariant.HASH:
        return max(eps_prf, bound_truncate(m, cs, ell))
    if ell >= m:
        return 0.0
    return (m - ell) / (m + cs)


@dataclass(frozen=True)
class GameConfig:
    """Shared game parameters.  n_events counts every record the device
    writes, the setup record included, so a window-aligned total can be
    chosen for the uniform variant.  slic_lambda is the baseline's
    dummy padding."""

    m: int
    cs: int
    n_events: int
    variant: CfVariant = CfVariant.HASH
    slic_lambda: int = 1024

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.cs < 0:
            raise ValueError("cs must be >= 0")
        if self.n_events < 1:
            raise ValueError("n_events must be >= 1")
        if self.slic_lambda < 0:
            raise ValueError("slic_lambda must be >= 0")

    def log_config(self) -> LogConfig:
        return LogConfig(m=self.m, cs=self.cs, variant=self.variant)


@dataclass(frozen=True)
class TruncateKeepKey:
    """Keep a genuine prefix that stops ell events short of what the
    trailing-cache allowance could excuse; present the key store as
    compromised."""

    ell: int
    name: ClassVar[str] = "truncate_keep_key"


@dataclass(frozen=True)
class RewindToQueried:
    """Write back a store snapshot captured when the device had logged
    `target` events, hiding everything after it."""

    target: int
    name: ClassVar[str] = "rewind_to_queried"


@dataclass(frozen=True)
class ModifyRecord:
    """Flip a byte inside the body of one stored record, leaving
    structure and key store untouched."""

    index: int
    name: ClassVar[str] = "modify_record"


@dataclass(frozen=True)
class TotalDeletion:
    """Present an empty (header-only) log store."""

    name: ClassVar[str] = "total_deletion"


@dataclass(frozen=True)
class TrialReport:
    scheme: str
    strategy: str
    m: int
    cs: int
    cf: str
    ell: int | None
    trials: int
    successes: int
    empirical: float
    theoretical: float
    sigma: float
    adaptive: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _flip_byte(data: bytes, offset: int = 0) -> bytes:
    return data[:offset] + bytes([data[offset] ^ 0x01]) + data[offset + 1:]


def _build_device(config: GameConfig, seed: bytes):
    log_config = config.log_config()
    state, init = gen(seed, log_config)
    for i in range(2, config.n_events + 1):
        log_event(state, b"event-%08d" % i)
    flush(state)
    return state, init, log_config


def _evolved_kstore(state, extra_epochs: int) -> bytes:
    """Key-store image as the attacker finds it: the state-controlled
    key may have stepped extra_epochs times past the kept prefix."""
    ks = state.kstore
    sc = ks.sc_key
    for _ in range(extra_epochs):
        sc = hmac.digest(sc, state.sc_tweak, "sha256")
    return serialize_kstore(
        KStoreState(ks.seq_key, sc, ks.seq_index, ks.sc_epoch + extra_epochs))


def _dek_prefix_trial(config: GameConfig, seed: bytes, rng: random.Random,
                      n_prime: int) -> bool:
    """Common core of truncation and rewind against the evolving-key
    scheme: genuine prefix of n_prime records, key store at a slot the
    attacker does not control."""
    state, init, log_config = _build_device(config, seed)
    j = rng.randint(0, config.cs // config.m)
    lstore = serialize_lstore(state.records[:n_prime])
    result = recover(lstore, _evolved_kstore(state, j), init, log_config)
    return not result.is_bottom


def _run_dek_trial(strategy, config: GameConfig, seed: bytes,
                   rng: random.Random, adaptive: bool) -> bool:
    if isinstance(strategy, TruncateKeepKey):
        n_prime = config.n_events - config.cs - strategy.ell
        return _dek_prefix_trial(config, seed, rng, n_prime)
    if isinstance(strategy, RewindToQueried):
        return _dek_prefix_trial(config, seed, rng, strategy.target)
    if isinstance(strategy, ModifyRecord):
        state, init, log_config = _build_device(config, seed)
        records = list(state.records)
        message, tag = records[strategy.index - 1]
        forged = _flip_byte(message) if message else b"\x01"
        records[strategy.index - 1] = (forged, tag)
        result = recover(serialize_lstore(records),
                         serialize_kstore(state.kstore), init, log_config)
        if result.is_bottom:
            return False
        return any(i == strategy.index and msg == forged
                   for i, msg in result.pairs)
    if isinstance(strategy, TotalDeletion):
        state, init, log_config = _build_device(config, seed)
        result = recover(LSTORE_HEADER, serialize_kstore(state.kstore),
                         init, log_config)
        return not result.is_bottom
    raise TypeError(f"unsupported strategy {strategy!r}")


def _slic_locator_chain(init, upto: int):
    key = init.key0
    for i in range(1, upto + 1):
        yield i, hmac.digest(key, i.to_bytes(8, "big"), "sha256")
        key = hmac.digest(key, init.key_tweak, "sha256")


def _run_slic_trial(strategy, config: GameConfig, seed: bytes,
                    rng: random.Random, adaptive: bool) -> bool:
    dummy_count = config.slic_lambda
    if isinstance(strategy, RewindToQueried):
        state, init = slic_gen(seed, dummy_count)
        if adaptive:
            for i in range(1, strategy.target + 1):
                slic_log(state, b"event-%08d" % i)
            snapshot = serialize_slic_store(state.store)
            for i in range(strategy.target + 1, config.n_events + 1):
                slic_log(state, b"event-%08d" % i)
            attack = snapshot
        else:
            # No mid-run observation: the best imitation of a rewind is
            # clipping the final array back to its earlier size.
            for i in range(1, config.n_events + 1):
                slic_log(state, b"event-%08d" % i)
            attack = serialize_slic_store(state.store[:dummy_count + strategy.target])
        return not slic_recover(attack, init, config.cs).is_bottom
    if isinstance(strategy, TruncateKeepKey):
        state, init = slic_gen(seed, dummy_count)
        for i in range(1, config.n_events + 1):
            slic_log(state, b"event-%08d" % i)
        keep = len(state.store) - config.cs - strategy.ell
        attack = serialize_slic_store(state.store[:keep])
        return not slic_recover(attack, init, config.cs).is_bottom
    if isinstance(strategy, ModifyRecord):
        state, init = slic_gen(seed, dummy_count)
        for i in range(1, config.n_events + 1):
            slic_log(state, b"event-%08d" % i)
        target_global = dummy_count + strategy.index
        locator_target = None
        for i, locator in _slic_locator_chain(init, target_global):
            if i == target_global:
                locator_target = locator
        store = list(state.store)
        for slot, (ct, tag, locator) in enumerate(store):
            if locator == locator_target:
                store[slot] = (_flip_byte(ct) if ct else b"\x01", tag, locator)
                break
        result = slic_recover(serialize_slic_store(store), init, config.cs)
        if result.is_bottom:
            return False
        original = b"event-%08d" % strategy.index
        return any(i == strategy.index and msg != original
                   for i, msg in result.pairs)
    if isinstance(strategy, TotalDeletion):
        _, init = slic_gen(seed, dummy_count)
        return not slic_recover(SLIC_HEADER, init, config.cs).is_bottom
    raise TypeError(f"unsupported strategy {strategy!r}")


_SCHEMES = {"dek": _run_dek_trial, "slic": _run_slic_trial}


def _validate(scheme: str, strategy, config: GameConfig) -> None:
    if isinstance(strategy, TruncateKeepKey):
        if strategy.ell < 0:
            raise ValueError("ell must be >= 0")
        if config.n_events - config.cs - strategy.ell < 1:
            raise ValueError(
                "n_events must exceed cs + ell so a prefix survives")
    elif isinstance(strategy, RewindToQueried):
        if not 1 <= strategy.target <= config.n_events - 1:
            raise ValueError("rewind target must name an interior point")
    elif isinstance(strategy, ModifyRecord):
        if not 1 <= strategy.index <= config.n_events:
            raise ValueError("record index out of range")


def _theory(scheme: str, strategy, config: GameConfig,
            adaptive: bool) -> tuple[float, int | None]:
    if scheme == "dek":
        if isinstance(strategy, TruncateKeepKey):
            ell = strategy.ell
        elif isinstance(strategy, RewindToQueried):
            ell = max(0, config.n_events - config.cs - strategy.target)
        else:
            return 0.0, None
        if config.variant is CfVariant.HASH:
            return bound_truncate(config.m, config.cs, ell), ell
        return bound_uniform(config.m, config.cs, ell), ell
    if isinstance(strategy, RewindToQueried):
        return (1.0 if adaptive else 0.0), None
    return 0.0, None


def run_game(scheme: str, strategy, config: GameConfig, trials: int,
             rng_seed: int, workers: int | None = None,
             adaptive: bool = True) -> TrialReport:
    """Play `trials` independent games of `strategy` against `scheme`
    and report empirical acceptance against the theoretical rate.

    Per-trial randomness (device seed, key-store slot, attack choices)
    derives deterministically from rng_seed.  workers is accepted for
    interface stability; trials run in-process since each one is
    dominated by hashing, not waiting.
    """
    if scheme not in _SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; "
                         f"choose from {sorted(_SCHEMES)}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    _validate(scheme, strategy, config)
    trial_fn = _SCHEMES[scheme]
    master = random.Random(rng_seed)
    successes = 0
    for _ in range(trials):
        seed = master.randbytes(32)
        trial_rng = random.Random(master.getrandbits(64))
        if trial_fn(strategy, config, seed, trial_rng, adaptive):
            successes += 1
    theoretical, ell = _theory(scheme, strategy, config, adaptive)
    if 0.0 < theoretical < 1.0:
        sigma = math.sqrt(theoretical * (1.0 - theoretical) / trials)
    else:
        sigma = 0.0
    return TrialReport(
        scheme=scheme, strategy=strategy.name, m=config.m, cs=config.cs,
        cf=config.variant.value, ell=ell, trials=trials,
        successes=successes, empirical=successes / trials,
        theoretical=theoretical, sigma=sigma, adaptive=adaptive)
