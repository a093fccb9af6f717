"""Independent reference implementations used as test oracles.

Everything in this module is written directly from the primitive
definitions (FIPS 198-1 style HMAC, plain SHA-256 threshold tests,
brute-force chain replays) without importing the package internals,
so a bug in the package cannot hide in its own tests.
"""

import hashlib

BLOCK = 64


def hmac_sha256_ref(key: bytes, msg: bytes) -> bytes:
    """HMAC-SHA-256 built from the raw ipad/opad construction."""
    if len(key) > BLOCK:
        key = hashlib.sha256(key).digest()
    key = key + b"\x00" * (BLOCK - len(key))
    ipad = bytes(b ^ 0x36 for b in key)
    opad = bytes(b ^ 0x5C for b in key)
    inner = hashlib.sha256(ipad + msg).digest()
    return hashlib.sha256(opad + inner).digest()


def cf_hash_ref(sc_key: bytes, index: int, m: int) -> bool:
    """Reference choice function: SHA-256(key || index) below floor(2^256 / m)."""
    digest = hashlib.sha256(sc_key + index.to_bytes(8, "big")).digest()
    return int.from_bytes(digest, "big") < (1 << 256) // m


def replay_chains_ref(seq_root: bytes, sc_root: bytes, seq_tweak: bytes, sc_tweak: bytes,
                      upto: int, m: int):
    """Brute-force replay of both key chains for indices 1..upto.

    Returns a list of per-index tuples (seq_key, sc_key_after, fired)
    plus the ordered list of state-controlled keys produced, starting
    with the initial one.  Uses only this module's reference primitives.
    """
    seq = seq_root
    sc = sc_root
    sc_chain = [sc_root]
    rows = []
    for i in range(1, upto + 1):
        seq = hmac_sha256_ref(seq, seq_tweak)
        fired = cf_hash_ref(sc, i, m)
        if fired:
            sc = hmac_sha256_ref(sc, sc_tweak)
            sc_chain.append(sc)
        rows.append((seq, sc, fired))
    return rows, sc_chain


def candidate_keys_ref(seq_root: bytes, sc_root: bytes, seq_tweak: bytes, sc_tweak: bytes,
                       n_prime: int, cs: int, m: int) -> set:
    """Candidate key set by the plain rule: the last state-controlled key
    evolved at or before n_prime plus every one evolved in (n_prime, n_prime+cs].
    """
    sc = sc_root
    last_at_or_before = sc_root
    later = set()
    for i in range(1, n_prime + cs + 1):
        if cf_hash_ref(sc, i, m):
            sc = hmac_sha256_ref(sc, sc_tweak)
            if i <= n_prime:
                last_at_or_before = sc
            else:
                later.add(sc)
    return {last_at_or_before} | later
