"""Command-line front end.

Commands: init, append, verify, crash-sim, attack-bench, bench.  All
reports are single JSON objects on stdout.

Exit codes: 0 success (and trusted verification), 2 usage error,
3 untrusted store, 4 I/O or device-state problem.

Configuration precedence for m / cs / variant: command-line flag, then
ACL_M / ACL_CS / ACL_VARIANT environment variables, then the defaults
(m = cs = 16384, hash variant).
"""

from __future__ import annotations

import argparse
import fcntl
import io
import json
import os
import socket
import struct
import sys
import time

from .adversary import (
    GameConfig,
    ModifyRecord,
    RewindToQueried,
    TotalDeletion,
    TruncateKeepKey,
    run_game,
)
from .crash import CrashParams, stability_estimate
from .logcore import (
    LSTORE_HEADER,
    DeviceState,
    FormatError,
    LogConfig,
    flush,
    gen,
    log_event,
    parse_initial_state,
    parse_kstore,
    serialize_initial_state,
    serialize_kstore,
)
from .primitives import CfVariant
from .recovery import recover
from .slic import slic_gen, slic_log

DEFAULT_M = 1 << 14
DEFAULT_CS = 1 << 14


class _CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _hex32(text: str) -> bytes:
    try:
        raw = bytes.fromhex(text)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be hexadecimal")
    if len(raw) != 32:
        raise argparse.ArgumentTypeError("seed must be exactly 32 bytes")
    return raw


def _host_port(text: str) -> tuple:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError("expected HOST:PORT")
    return host, int(port)


def _add_store_flags(sp, *, kstore=True):
    sp.add_argument("--lstore", required=True, help="log store path")
    if kstore:
        sp.add_argument("--kstore", required=True, help="key store path")
    sp.add_argument("--init-state", required=True, dest="init_state",
                    help="verifier initial-state path")


def _add_config_flags(sp):
    sp.add_argument("--m", type=int, default=None,
                    help="expected events per key evolution "
                         "(default ACL_M or 16384)")
    sp.add_argument("--cs", type=int, default=None,
                    help="write-behind cache capacity "
                         "(default ACL_CS or 16384)")
    sp.add_argument("--variant", choices=["hash", "uniform"], default=None,
                    help="choice-function variant (default ACL_VARIANT "
                         "or hash)")


def _env_int(name: str):
    raw = os.environ.get(name)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise _CliError(2, f"{name} must be an integer, got {raw!r}")


def _resolve_config(args) -> LogConfig:
    m = args.m if args.m is not None else _env_int("ACL_M")
    cs = args.cs if args.cs is not None else _env_int("ACL_CS")
    variant = args.variant or os.environ.get("ACL_VARIANT") or "hash"
    try:
        return LogConfig(
            m=m if m is not None else DEFAULT_M,
            cs=cs if cs is not None else DEFAULT_CS,
            variant=CfVariant(variant))
    except ValueError as exc:
        raise _CliError(2, str(exc))


def _read_file(path: str) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as exc:
        raise _CliError(4, f"cannot read {path}: {exc}")


def _atomic_write(path: str, data: bytes) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise _CliError(4, f"cannot write {path}: {exc}")


def _load_init_state(path: str):
    try:
        return parse_initial_state(_read_file(path))
    except FormatError as exc:
        raise _CliError(4, f"unusable initial state {path}: {exc}")


def cmd_init(args) -> int:
    config = _resolve_config(args)
    for path in (args.lstore, args.kstore, args.init_state):
        if os.path.exists(path):
            raise _CliError(4, f"refusing to overwrite {path}")
    seed = args.seed if args.seed is not None else os.urandom(32)
    created_at = 0 if args.seed is not None else int(time.time())
    try:
        with open(args.lstore, "wb") as sink:
            state, init = gen(seed, config, created_at=created_at,
                              sink=sink, retain_records=False)
            sink.flush()
            os.fsync(sink.fileno())
    except OSError as exc:
        raise _CliError(4, f"cannot write {args.lstore}: {exc}")
    _atomic_write(args.kstore, serialize_kstore(state.kstore))
    _atomic_write(args.init_state, serialize_initial_state(init))
    print(json.dumps({"initialized": True, "records": 1,
                      "m": config.m, "cs": config.cs,
                      "cf": config.variant.value}))
    return 0


def _gather_messages(args, state) -> int:
    """Feed events into the device from the selected source; returns the
    number of events logged."""
    count = 0
    if args.listen is not None:
        host, port = args.listen
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            sock.bind((host, port))
            while count < args.limit:
                data, _ = sock.recvfrom(1 << 16)
                if not data:
                    continue  # empty datagrams are liveness probes
                log_event(state, data)
                count += 1
        except OSError as exc:
            raise _CliError(4, f"listen failed: {exc}")
        finally:
            sock.close()
        return count
    if args.stdin:
        for line in sys.stdin.buffer:
            log_event(state, line.rstrip(b"\n"))
            count += 1
        return count
    for text in args.message:
        log_event(state, text.encode("utf-8"))
        count += 1
    return count


def cmd_append(args) -> int:
    config = _resolve_config(args)
    sources = sum((bool(args.message), args.stdin, args.listen is not None))
    if sources != 1:
        raise _CliError(
            2, "choose exactly one of --message, --stdin, --listen")
    if args.listen is not None and args.limit is None:
        raise _CliError(2, "--listen requires --limit")

    init = _load_init_state(args.init_state)
    try:
        kstore = parse_kstore(_read_file(args.kstore))
    except FormatError as exc:
        raise _CliError(4, f"unusable key store {args.kstore}: {exc}")
    if kstore is None:
        raise _CliError(4, "key material is gone; appending is impossible")

    try:
        log_file = open(args.lstore, "r+b")
    except OSError as exc:
        raise _CliError(4, f"cannot open {args.lstore}: {exc}")
    with log_file:
        fcntl.flock(log_file.fileno(), fcntl.LOCK_EX)
        if log_file.read(len(LSTORE_HEADER)) != LSTORE_HEADER:
            raise _CliError(4, f"{args.lstore} is not a log store")
        log_file.seek(0, os.SEEK_END)
        state = DeviceState(kstore, config, init.seq_tweak, init.sc_tweak,
                            sink=log_file, retain_records=False)
        count = _gather_messages(args, state)
        flush(state)
        log_file.flush()
        os.fsync(log_file.fileno())
        _atomic_write(args.kstore, serialize_kstore(state.kstore))
    print(json.dumps({"appended": count,
                      "seq_index": state.kstore.seq_index}))
    return 0


def cmd_verify(args) -> int:
    config = _resolve_config(args)
    init = _load_init_state(args.init_state)
    lstore_bytes = _read_file(args.lstore)
    kstore_bytes = b""
    if os.path.exists(args.kstore):
        kstore_bytes = _read_file(args.kstore)
    result = recover(lstore_bytes, kstore_bytes, init, config)
    lo, hi = result.expendable
    print(json.dumps({
        "n_prime": result.n_prime,
        "recovered": 0 if result.is_bottom else len(result.pairs),
        "expendable_lo": lo,
        "expendable_hi": hi,
        "verdict": "untrusted" if result.is_bottom else "trusted",
    }))
    return 3 if result.is_bottom else 0


def cmd_crash_sim(args) -> int:
    config = _resolve_config(args)
    params = CrashParams(alpha=args.alpha, cs=config.cs, rng_seed=args.seed)
    try:
        report = stability_estimate(config, params, trials=args.trials)
    except ValueError as exc:
        raise _CliError(2, str(exc))
    print(json.dumps({
        "trials": report.trials, "both_lost": report.both_lost,
        "empirical": report.empirical, "theoretical": report.theoretical,
        "alpha": report.alpha, "m": report.m, "cs": config.cs,
    }))
    return 0


def _build_strategy(args, parser):
    if args.strategy == "truncate":
        if args.ell is None:
            parser.error("--strategy truncate requires --ell")
        return TruncateKeepKey(ell=args.ell)
    if args.strategy == "rewind":
        if args.target is None:
            parser.error("--strategy rewind requires --target")
        return RewindToQueried(target=args.target)
    if args.strategy == "modify":
        if args.index is None:
            parser.error("--strategy modify requires --index")
        return ModifyRecord(index=args.index)
    return TotalDeletion()


def cmd_attack_bench(args, parser) -> int:
    log_config = _resolve_config(args)
    strategy = _build_strategy(args, parser)
    config = GameConfig(m=log_config.m, cs=log_config.cs,
                        n_events=args.n_events,
                        variant=log_config.variant,
                        slic_lambda=args.slic_lambda)
    try:
        report = run_game(args.scheme, strategy, config,
                          trials=args.trials, rng_seed=args.seed,
                          adaptive=not args.non_adaptive)
    except ValueError as exc:
        raise _CliError(2, str(exc))
    print(report.to_json())
    return 0


def cmd_bench(args) -> int:
    config = _resolve_config(args)
    events = args.events
    message = b"x" * args.message_size
    timer = time.perf_counter

    sink = io.BytesIO()
    state, _ = gen(b"\x42" * 32, config, sink=sink, retain_records=False)
    start = timer()
    for _ in range(events):
        log_event(state, message)
    flush(state)
    ours = timer() - start

    plain = io.BytesIO()
    pack = struct.pack
    start = timer()
    for _ in range(events):
        plain.write(pack(">I", len(message)) + message)
    plain_time = timer() - start

    slic_state, _ = slic_gen(b"\x42" * 32, args.slic_lambda)
    start = timer()
    for _ in range(events):
        slic_log(slic_state, message)
    slic_time = timer() - start

    print(json.dumps({
        "events": events,
        "message_size": args.message_size,
        "m": config.m, "cs": config.cs,
        "ours_events_per_sec": events / ours,
        "plain_events_per_sec": events / plain_time,
        "slic_events_per_sec": events / slic_time,
        "overhead_vs_plain": ours / plain_time,
        "speedup_vs_slic": slic_time / ours,
    }))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adclog",
        description="Tamper-evident forward-secure event log with "
                    "double evolving keys")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("init", help="initialize a device")
    _add_store_flags(sp)
    _add_config_flags(sp)
    sp.add_argument("--seed", type=_hex32, default=None,
                    help="32-byte hex seed for reproducible setup")

    sp = sub.add_parser("append", help="log events to an existing store")
    _add_store_flags(sp)
    _add_config_flags(sp)
    sp.add_argument("--message", action="append", default=[],
                    help="log one UTF-8 message (repeatable)")
    sp.add_argument("--stdin", action="store_true",
                    help="log one event per stdin line")
    sp.add_argument("--listen", type=_host_port, default=None,
                    metavar="HOST:PORT", help="log UDP datagrams")
    sp.add_argument("--limit", type=int, default=None,
                    help="stop after this many datagrams (with --listen)")

    sp = sub.add_parser("verify", help="check and recover a store")
    _add_store_flags(sp)
    _add_config_flags(sp)

    sp = sub.add_parser("crash-sim", help="estimate double key loss rate")
    _add_config_flags(sp)
    sp.add_argument("--alpha", type=float, required=True,
                    help="per-update key loss probability")
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("attack-bench", help="run an attack game")
    _add_config_flags(sp)
    sp.add_argument("--scheme", choices=["dek", "slic"], required=True)
    sp.add_argument("--strategy",
                    choices=["truncate", "rewind", "modify", "delete"],
                    required=True)
    sp.add_argument("--n-events", type=int, required=True, dest="n_events")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--ell", type=int, default=None)
    sp.add_argument("--target", type=int, default=None)
    sp.add_argument("--index", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--slic-lambda", type=int, default=1024,
                    dest="slic_lambda")
    sp.add_argument("--non-adaptive", action="store_true",
                    dest="non_adaptive")

    sp = sub.add_parser("bench", help="throughput vs plain and baseline")
    _add_config_flags(sp)
    sp.add_argument("--events", type=int, default=100_000)
    sp.add_argument("--message-size", type=int, default=64,
                    dest="message_size")
    sp.add_argument("--slic-lambda", type=int, default=1024,
                    dest="slic_lambda")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "init": cmd_init,
        "append": cmd_append,
        "verify": cmd_verify,
        "crash-sim": cmd_crash_sim,
        "bench": cmd_bench,
    }
    try:
        if args.command == "attack-bench":
            return cmd_attack_bench(args, parser)
        return handlers[args.command](args)
    except _CliError as exc:
        if exc.code == 2:
            parser.error(str(exc))  # prints usage, raises SystemExit(2)
        print(f"adclog: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
