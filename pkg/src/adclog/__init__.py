"""Tamper-evident logging with double evolving keys.

The package bundles the logging engine, the recovery/verification
procedure, a crash fault model, an adaptive attack benchmark, and a
swap-in baseline scheme for comparison.
"""

from .primitives import CfParams, CfVariant, cf_hash, cf_uniform, compute_tag, evolve_key
from .logcore import (
    DeviceState,
    FormatError,
    InitialState,
    KStoreState,
    LogConfig,
    flush,
    gen,
    log_event,
    parse_initial_state,
    parse_kstore,
    parse_lstore,
    serialize_initial_state,
    serialize_kstore,
    serialize_lstore,
)
from .recovery import (
    CandidateKeySet,
    KeySchedule,
    RecoverResult,
    expendable_set,
    recover,
    reconstruct_keys,
)
from .crash import CrashParams, CrashedState, StabilityReport, normal_crash, stability_estimate
from .slic import (
    SlicInit,
    SlicRecoverResult,
    SlicState,
    parse_slic_store,
    serialize_slic_store,
    slic_gen,
    slic_log,
    slic_recover,
)
from .adversary import (
    GameConfig,
    ModifyRecord,
    RewindToQueried,
    TotalDeletion,
    TrialReport,
    TruncateKeepKey,
    bound_truncate,
    bound_uniform,
    run_game,
    acceptance_envelope,
)

__all__ = [
    "CfParams", "CfVariant", "cf_hash", "cf_uniform", "compute_tag", "evolve_key",
    "DeviceState", "FormatError", "InitialState", "KStoreState", "LogConfig",
    "flush", "gen", "log_event",
    "parse_initial_state", "parse_kstore", "parse_lstore",
    "serialize_initial_state", "serialize_kstore", "serialize_lstore",
    "CandidateKeySet", "KeySchedule", "RecoverResult",
    "expendable_set", "recover", "reconstruct_keys",
    "CrashParams", "CrashedState", "StabilityReport",
    "normal_crash", "stability_estimate",
    "SlicInit", "SlicRecoverResult", "SlicState",
    "parse_slic_store", "serialize_slic_store",
    "slic_gen", "slic_log", "slic_recover",
    "GameConfig", "ModifyRecord", "RewindToQueried", "TotalDeletion",
    "TrialReport", "TruncateKeepKey",
    "bound_truncate", "bound_uniform", "run_game", "acceptance_envelope",
]
