"""Recovery and plausibility-check tests.

The candidate-key rule is checked against an independent brute-force
replay (oracles.py) and against a pinned two-candidate scenario whose
seed was searched once with the oracle and frozen below.
"""

import random

import pytest

from adclog.logcore import (
    LogConfig,
    flush,
    gen,
    log_event,
    serialize_kstore,
    serialize_lstore,
)
from adclog.primitives import CfVariant
from adclog.recovery import (
    RecoverResult,
    expendable_set,
    reconstruct_keys,
    recover,
)
from oracles import candidate_keys_ref, cf_hash_ref, hmac_sha256_ref, replay_chains_ref

# Seed (as 32-byte big-endian integer) for which m=4 fires the
# state-controlled chain at ordinals [2, 9, 11, 13]: three evolutions at
# or before 11, one more inside the following cache window of 4.
TWO_CANDIDATE_SEED = (11).to_bytes(32, "big")


def make_log(seed=b"\x42" * 32, n=50, m=4, cs=8, variant=CfVariant.HASH,
             msg=lambda i: b"event-%05d" % i):
    config = LogConfig(m=m, cs=cs, variant=variant)
    state, init = gen(seed, config)
    for i in range(n):
        log_event(state, msg(i))
    flush(state)
    return state, init, config


class TestExpendableSet:
    def test_frozen_examples(self):
        assert expendable_set(100, 16) == (85, 116)
        assert expendable_set(3, 8) == (1, 11)

    def test_cs_zero_is_empty(self):
        lo, hi = expendable_set(10, 0)
        assert lo > hi

    def test_lower_bound_clamped_to_one(self):
        lo, hi = expendable_set(5, 100)
        assert lo == 1
        assert hi == 105


class TestReconstructKeys:
    def test_two_candidate_scenario(self):
        state, init, config = make_log(seed=TWO_CANDIDATE_SEED, n=14, m=4, cs=4)
        # independent replay: collect the state-controlled chain
        _, sc_chain = replay_chains_ref(init.seq_root, init.sc_root, init.seq_tweak,
                                        init.sc_tweak, 15, 4)
        assert len(sc_chain) == 5  # initial + four evolutions
        _, candidates = reconstruct_keys(init, 11, config)
        assert candidates.keys == {sc_chain[3], sc_chain[4]}

    def test_matches_bruteforce_oracle(self):
        rng = random.Random(99)
        for _ in range(25):
            seed = rng.randbytes(32)
            config = LogConfig(m=8, cs=32)
            _, init = gen(seed, config)
            _, candidates = reconstruct_keys(init, 200, config)
            expected = candidate_keys_ref(init.seq_root, init.sc_root, init.seq_tweak,
                                          init.sc_tweak, 200, 32, 8)
            assert candidates.keys == expected

    def test_schedule_matches_reference_replay(self):
        config = LogConfig(m=4, cs=8)
        _, init = gen(b"\x05" * 32, config)
        schedule, _ = reconstruct_keys(init, 40, config)
        rows, sc_chain = replay_chains_ref(init.seq_root, init.sc_root, init.seq_tweak,
                                           init.sc_tweak, 48, 4)
        sc_pos = 0
        for entry, (seq_key, sc_after, fired) in zip(schedule.entries, rows):
            if fired:
                assert entry.key == sc_after
                assert entry.randomizer == sc_chain[sc_pos]
                sc_pos += 1
            else:
                assert entry.key == seq_key
                assert entry.randomizer is None

    def test_no_evolutions_single_candidate(self):
        # a chain that never fires keeps the root as the only candidate
        rng = random.Random(5)
        for _ in range(40):
            seed = rng.randbytes(32)
            config = LogConfig(m=64, cs=4)
            _, init = gen(seed, config)
            sc = init.sc_root
            if any(cf_hash_ref(sc, i, 64) for i in range(1, 9)):
                continue
            _, candidates = reconstruct_keys(init, 4, config)
            assert candidates.keys == {init.sc_root}
            break
        else:
            pytest.fail("no fire-free prefix found")


class TestRecoverRoundTrip:
    @pytest.mark.parametrize("variant", [CfVariant.HASH, CfVariant.UNIFORM])
    def test_all_messages_recovered_in_order(self, variant):
        state, init, config = make_log(n=60, m=4, cs=8, variant=variant)
        result = recover(serialize_lstore(state.records),
                         serialize_kstore(state.kstore), init, config)
        assert not result.is_bottom
        assert result.n_prime == 61
        assert [i for i, _ in result.pairs] == list(range(1, 62))
        assert [m for _, m in result.pairs][1:] == [b"event-%05d" % i for i in range(60)]
        assert result.expendable == expendable_set(61, 8)

    def test_truncation_within_cache_window_still_trusted(self):
        state, init, config = make_log(n=60, m=4, cs=8)
        for drop in (1, 4, 8):
            records = state.records[:-drop]
            result = recover(serialize_lstore(records),
                             serialize_kstore(state.kstore), init, config)
            assert not result.is_bottom
            assert len(result.pairs) == 61 - drop

    def test_partial_trailing_record_dropped(self):
        state, init, config = make_log(n=20, m=4, cs=8)
        data = serialize_lstore(state.records)
        result = recover(data[:-7], serialize_kstore(state.kstore), init, config)
        assert not result.is_bottom
        assert len(result.pairs) == 20  # boundary record lost, rest intact


class TestRecoverRejects:
    def test_flip_in_old_region_is_bottom(self):
        state, init, config = make_log(n=80, m=4, cs=8)
        rng = random.Random(1)
        for _ in range(20):
            records = list(state.records)
            idx = rng.randint(0, len(records) - 8 - 1)  # index <= n' - cs
            msg, tag = records[idx]
            records[idx] = (msg, tag[:5] + bytes([tag[5] ^ 0xFF]) + tag[6:])
            result = recover(serialize_lstore(records),
                             serialize_kstore(state.kstore), init, config)
            assert result.is_bottom

    def test_flip_in_expendable_tail_omits_index(self):
        state, init, config = make_log(n=80, m=4, cs=8)
        records = list(state.records)
        n_prime = len(records)
        victim = n_prime - 2  # inside (n'-cs, n']
        msg, tag = records[victim - 1]
        records[victim - 1] = (msg + b"!", tag)
        result = recover(serialize_lstore(records),
                         serialize_kstore(state.kstore), init, config)
        assert not result.is_bottom
        recovered = {i for i, _ in result.pairs}
        assert victim not in recovered
        assert len(result.pairs) == n_prime - 1

    def test_missing_kstore_is_bottom(self):
        state, init, config = make_log()
        lstore = serialize_lstore(state.records)
        assert recover(lstore, b"", init, config).is_bottom
        assert recover(lstore, bytes(86), init, config).is_bottom

    def test_foreign_sc_key_is_bottom(self):
        state, init, config = make_log()
        kstore = state.kstore
        kstore.sc_key = hmac_sha256_ref(b"\xAA" * 32, b"not-in-the-chain")
        result = recover(serialize_lstore(state.records),
                         serialize_kstore(kstore), init, config)
        assert result.is_bottom

    def test_kstore_of_other_device_is_bottom(self):
        state, init, config = make_log(seed=b"\x01" * 32)
        other_state, _, _ = make_log(seed=b"\x02" * 32)
        result = recover(serialize_lstore(state.records),
                         serialize_kstore(other_state.kstore), init, config)
        assert result.is_bottom

    def test_total_deletion_is_bottom(self):
        state, init, config = make_log()
        result = recover(serialize_lstore([]),
                         serialize_kstore(state.kstore), init, config)
        assert result.is_bottom

    def test_garbage_lstore_is_bottom(self):
        state, init, config = make_log()
        result = recover(b"\x00\x01garbage", serialize_kstore(state.kstore),
                         init, config)
        assert result.is_bottom

    def test_structurally_damaged_kstore_is_bottom(self):
        state, init, config = make_log()
        result = recover(serialize_lstore(state.records),
                         b"ADCX" + bytes(82), init, config)
        assert result.is_bottom


class TestRecoverResult:
    def test_bottom_constructor(self):
        r = RecoverResult.bottom(7)
        assert r.is_bottom
        assert r.n_prime == 7
        assert r.pairs is None
