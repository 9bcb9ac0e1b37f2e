"""Command-line entry point.

Exit codes: 0 success, 1 experiment-contract failure or malformed trace,
2 I/O, configuration or usage error.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path
from typing import Sequence

from . import report
from .config import ConfigError, SimConfig, load_config, parse_size
from .defense import SimulationFault, TimeCacheHierarchy
from .harness import HarnessError, config_pair, default_threshold, leakage, run_overhead, run_sensitivity
from .simulator import simulate
from .trace import TraceError, parse_trace, serialize
from .workload import (BackgroundSpec, RsaVictimSpec, SchedulePolicy, gen_background, gen_fuzz,
                       gen_microbenchmark, gen_rsa_attack, random_key, sensitivity_workload)

EXIT_OK, EXIT_CONTRACT, EXIT_IO = 0, 1, 2


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot open {path}: {exc.strerror or exc}", EXIT_IO) from None
    except UnicodeDecodeError as exc:
        raise CliError(f"{path}: not UTF-8 text ({exc.reason})", EXIT_IO) from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_IO) from None


def _config(args) -> SimConfig:
    try:
        cfg = load_config(args.config) if args.config else SimConfig()
    except OSError as exc:
        raise CliError(f"cannot open {args.config}: {exc.strerror or exc}", EXIT_IO) from None
    except (ConfigError, TypeError) as exc:
        raise CliError(f"config error: {exc}", EXIT_IO) from None
    changes = {}
    for flag in ("defense", "constant_time_flush", "switch_cost_charged"):
        value = getattr(args, flag, None)
        if value is not None:
            changes[flag] = value == "on"
    if getattr(args, "timestamp_bits", None):
        changes["timestamp_bits"] = args.timestamp_bits
    if changes:
        try:
            cfg = cfg.replace(**changes)
        except ConfigError as exc:
            raise CliError(f"config error: {exc}", EXIT_IO) from None
    return cfg


def _load_trace(path: str):
    text = _read_text(path)
    try:
        return parse_trace(text)
    except TraceError as exc:
        raise CliError(f"{path}: {exc}", EXIT_CONTRACT) from None


def _sizes(text: str) -> list[int]:
    try:
        return [parse_size(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise CliError(f"bad size list {text!r}: {exc}", EXIT_IO) from None


# -- subcommands ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    events = _load_trace(args.trace)
    cfg = _config(args)
    try:
        result = simulate(events, cfg)
    except SimulationFault as exc:
        raise CliError(f"{args.trace}: simulation fault: {exc}", EXIT_CONTRACT) from None
    text = report.stats_json(result) if args.format == "json" else report.stats_csv(result)
    _write(args.out, text)
    return EXIT_OK


def cmd_compare(args) -> int:
    events = _load_trace(args.trace)
    base, dfn = config_pair(_config(args))
    try:
        rep = run_overhead(events, base, dfn, workload=Path(args.trace).stem)
    except SimulationFault as exc:
        raise CliError(f"{args.trace}: simulation fault: {exc}", EXIT_CONTRACT) from None
    level = args.level or base.levels[-1].name
    text = report.overhead_json(rep) if args.format == "json" else report.overhead_csv([rep], level)
    _write(args.out, text)
    if args.svg:
        _write(args.svg, report.overhead_svg(rep))
    for lv in rep.levels:
        if not lv.identity_holds:
            print(f"accounting identity violated at {lv.level}", file=sys.stderr)
            return EXIT_CONTRACT
    return EXIT_OK


def _scenario(args):
    if args.scenario == "micro":
        touched = None
        if args.touched is not None:
            if not 0 <= args.touched <= args.lines:
                raise CliError("--touched must be between 0 and --lines", EXIT_IO)
            touched = sorted(random.Random(args.seed).sample(range(args.lines), args.touched))
        return gen_microbenchmark(args.lines, touched), {"lines": args.lines}
    key = random_key(args.key_bits, args.seed)
    spec = RsaVictimSpec(key, same_context=args.same_context)
    return gen_rsa_attack(spec), {"key_bits": args.key_bits, "seed": args.seed}


def cmd_attack(args) -> int:
    if args.key_bits <= 0 or args.lines <= 0:
        raise CliError("--key-bits and --lines must be positive", EXIT_IO)
    cfg = _config(args)
    scenario, meta = _scenario(args)
    threshold = args.threshold if args.threshold is not None else default_threshold(cfg)
    base_cfg, def_cfg = config_pair(cfg)
    baseline = None if args.defense_only else leakage(simulate(scenario.events, base_cfg), scenario,
                                                      threshold, "baseline")
    defense = leakage(simulate(scenario.events, def_cfg), scenario, threshold, "timecache")
    sys.stdout.write(f"scenario={scenario.name} " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    sys.stdout.write(report.attack_text(baseline, defense))
    if args.json:
        if baseline is None:
            _write(args.json, report.to_json({"kind": "attack", "scenario": scenario.name,
                                              "timecache": defense.to_dict(), **meta}))
        else:
            _write(args.json, report.attack_json(scenario.name, baseline, defense, **meta))
    ok = defense.hits_observed == 0
    if baseline is not None:
        ok = ok and baseline.accuracy == 1.0
    if not ok:
        print("attack contract failed: defense must see 0 hits and baseline must recover "
              "the secret exactly", file=sys.stderr)
    return EXIT_OK if ok else EXIT_CONTRACT


def _background_spec(args) -> BackgroundSpec:
    if args.preset == "sensitivity":
        return sensitivity_workload(seed=args.seed)
    return BackgroundSpec(nprocs=args.nprocs, footprint_lines=args.footprint_lines,
                          shared_lines=args.shared_lines, accesses=args.accesses,
                          shared_fraction=args.shared_fraction, shared_pattern=args.shared_pattern,
                          seed=args.seed, policy=SchedulePolicy(slice_accesses=args.slice))


def cmd_sweep(args) -> int:
    sizes = _sizes(args.sizes)
    if len(sizes) < 2:
        raise CliError("sweep needs at least two LLC sizes", EXIT_IO)
    cfg = _config(args)
    if args.trace:
        events = _load_trace(args.trace)
    else:
        events = gen_background(_background_spec(args))
    try:
        result = run_sensitivity(events, cfg, sizes, workers=args.workers)
    except (ConfigError, HarnessError) as exc:
        raise CliError(f"config error: {exc}", EXIT_IO) from None
    text = report.sweep_json(result) if args.format == "json" else report.sweep_csv(result)
    _write(args.out, text)
    if args.svg:
        _write(args.svg, report.sweep_svg(result))
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.kind == "micro":
        events = gen_microbenchmark(args.lines).events
    elif args.kind == "rsa":
        events = gen_rsa_attack(RsaVictimSpec(random_key(args.key_bits, args.seed))).events
    elif args.kind == "fuzz":
        events = gen_fuzz(args.seed, length=args.accesses)
    else:
        events = gen_background(_background_spec(args))
    _write(args.out, serialize(events))
    return EXIT_OK


def cmd_dump_array(args) -> int:
    cfg = _config(args)
    events = _load_trace(args.trace) if args.trace else []
    h = TimeCacheHierarchy(cfg.hierarchy(), cfg.options())
    try:
        simulate(events, cfg, hierarchy=h)
    except SimulationFault as exc:
        raise CliError(f"simulation fault: {exc}", EXIT_CONTRACT) from None
    names = [c.name for c in h.caches]
    if args.level not in names:
        raise CliError(f"unknown level {args.level!r}; choose from {names}", EXIT_IO)
    cache = h.caches[names.index(args.level)]
    _write(args.out, cache.array.dump() + "\n")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, flags: bool = True) -> None:
    p.add_argument("--config", help="JSON config file (defaults built in)")
    if flags:
        p.add_argument("--defense", choices=("on", "off"), help="override the defense flag")
        p.add_argument("--constant-time-flush", dest="constant_time_flush", choices=("on", "off"))
        p.add_argument("--switch-cost", dest="switch_cost_charged", choices=("on", "off"))
        p.add_argument("--timestamp-bits", type=int)


def _workload_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=("none", "sensitivity"), default="none",
                   help="'sensitivity' selects the built-in LLC sweep workload")
    p.add_argument("--nprocs", type=int, default=2)
    p.add_argument("--footprint-lines", type=int, default=4096)
    p.add_argument("--shared-lines", type=int, default=1024)
    p.add_argument("--shared-fraction", type=float, default=0.3)
    p.add_argument("--shared-pattern", choices=("uniform", "sweep"), default="uniform")
    p.add_argument("--accesses", type=int, default=50_000)
    p.add_argument("--slice", type=int, default=2000, help="accesses per scheduling slice")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timecache", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one trace and write statistics")
    p.add_argument("trace")
    _common(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="paired baseline/TimeCache run of one trace")
    p.add_argument("trace")
    _common(p)
    p.add_argument("--level", help="level for the CSV MPKI columns (default: last level)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.add_argument("--svg", help="write a first-access fraction chart")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("attack", help="run a reuse attack against baseline and TimeCache")
    p.add_argument("scenario", choices=("micro", "rsa"))
    _common(p, flags=False)
    p.add_argument("--constant-time-flush", dest="constant_time_flush", choices=("on", "off"))
    p.add_argument("--timestamp-bits", type=int)
    p.add_argument("--key-bits", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lines", type=int, default=256, help="shared array size in lines (micro)")
    p.add_argument("--touched", type=int, help="victim touches this many random lines (micro)")
    p.add_argument("--same-context", action="store_true",
                   help="attacker and victim time-share one hardware context (rsa)")
    p.add_argument("--threshold", type=float, help="hit threshold in cycles")
    p.add_argument("--defense-only", action="store_true", help="only run the TimeCache side")
    p.add_argument("--json", help="write both leakage reports as JSON")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="LLC size sensitivity sweep")
    p.add_argument("--sizes", default="2M,4M,8M", help="comma-separated LLC sizes")
    p.add_argument("--trace", help="trace file (default: generated workload)")
    _common(p)
    _workload_args(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen", help="write a generated trace")
    p.add_argument("kind", choices=("micro", "rsa", "background", "fuzz"))
    _workload_args(p)
    p.add_argument("--lines", type=int, default=256)
    p.add_argument("--key-bits", type=int, default=64)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("dump-array", help="print a level's timestamp/s-bit array in both orientations")
    p.add_argument("--trace")
    p.add_argument("--level", default="L1D")
    _common(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_array)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"timecache: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, ConfigError) as exc:
        print(f"timecache: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
