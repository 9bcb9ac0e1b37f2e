"""Acceptance criteria 1-8.

Each test prints one ``[PASS]``/``[FAIL]`` line, also under pytest's output
capture. Run through pytest or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import sys

import numpy as np

from timecache import cli
from timecache.bitserial import TransposeArray
from timecache.cache import CacheHierarchy
from timecache.config import LevelConfig, SimConfig
from timecache.defense import SwitchCostModel, sbit_copy_accesses, wrapped_rollover
from timecache.harness import run_attack, run_overhead, run_sensitivity
from timecache.simulator import simulate
from timecache.workload import (BackgroundSpec, RsaVictimSpec, gen_background, gen_microbenchmark,
                                gen_rsa_attack, random_key, sensitivity_workload)
from oracles import fuzz_trace, run_with_oracle, small_config

MB = 1 << 20
N_TRACES = 10_000


def verdict(num: int, title: str, ok: bool, detail: str, capsys=None) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title} ({detail})"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    assert ok, line


def test_criterion_1_security(capsys):
    base, dfn = run_attack(gen_microbenchmark(), SimConfig())
    micro_ok = base.hits_observed == 256 and dfn.hits_observed == 0
    failures = []
    for seed in range(20):
        sc = gen_rsa_attack(RsaVictimSpec(random_key(64, seed)))
        b, d = run_attack(sc, SimConfig())
        if b.accuracy != 1.0 or d.hits_observed != 0:
            failures.append(seed)
    cli_ok = cli.main(["attack", "micro"]) == 0 and cli.main(["attack", "rsa", "--key-bits", "64"]) == 0
    if capsys is not None:
        capsys.readouterr()
    verdict(1, "reuse attacks blocked", micro_ok and not failures and cli_ok,
            f"micro baseline={base.hits_observed} defense={dfn.hits_observed}; "
            f"rsa seeds failing={failures}; cli exit ok={cli_ok}", capsys)


def test_criterion_2_comparator(capsys):
    mismatches = 0
    bad_iterations = 0
    tcs = np.arange(256)
    for ts in range(256):
        arr = TransposeArray(256, 8)
        for col in range(256):
            arr.write_tc(col, col)
        arr.sbits[0][:] = True
        mask = arr.compare_and_reset(ts, 0)
        mismatches += int((mask != (tcs > ts)).sum())
        bad_iterations += arr.last_iterations != 8
    rng = np.random.default_rng(2024)
    pairs = 0
    for _ in range(1000):
        tc = rng.integers(0, 1 << 32, 100, dtype=np.uint64)
        ts = int(rng.integers(0, 1 << 32, dtype=np.uint64))
        arr = TransposeArray(100, 32)
        for col, v in enumerate(tc):
            arr.write_tc(col, int(v))
        mask = arr.compare_and_reset(ts, 0)
        mismatches += int((mask != (tc > np.uint64(ts))).sum())
        bad_iterations += arr.last_iterations != 32
        pairs += 100
    verdict(2, "bit-serial compare equals unsigned tc > ts", mismatches == 0 and bad_iterations == 0,
            f"65536 8-bit pairs + {pairs} 32-bit pairs, mismatches={mismatches}, "
            f"calls with wrong iteration count={bad_iterations}", capsys)


def _oracle_sweep(config, n):
    bad_hits = repeats = hits = 0
    min_wraps = None
    for seed in range(n):
        _, oracle, h = run_with_oracle(fuzz_trace(seed), config)
        bad_hits += len(oracle.bad_hits)
        repeats += len(oracle.repeat_first_access)
        hits += oracle.checked_hits
        wraps = h.now >> config.timestamp_bits
        min_wraps = wraps if min_wraps is None else min(min_wraps, wraps)
    return bad_hits, repeats, hits, min_wraps


def test_criterion_3_first_access_accounting(capsys):
    bad_hits, repeats, hits, _ = _oracle_sweep(small_config(), N_TRACES)
    verdict(3, "first-access accounting vs last-toucher oracle", bad_hits == 0 and repeats == 0 and hits > 0,
            f"{N_TRACES} traces, {hits} hits checked, wrongly granted={bad_hits}, "
            f"repeated first accesses={repeats}", capsys)


def test_criterion_4_switch_cost(capsys):
    got = [sbit_copy_accesses(size // 64) for size in (64 << 10, 256 << 10, 8 * MB)]
    cfg = SimConfig(levels=(LevelConfig("L1", 64 << 10, role="data"),
                            LevelConfig("L1I", 64 << 10, role="instruction"),
                            LevelConfig("L2", 256 << 10, hit_latency=10),
                            LevelConfig("L3", 8 * MB, assoc=16, hit_latency=30)))
    model = SwitchCostModel.for_hierarchy(cfg.hierarchy())
    ok = got == [2, 8, 256] and model.sbit_copy_accesses == {"L1": 2, "L1I": 2, "L2": 8, "L3": 256}
    verdict(4, "s-bit copy transactions", ok, f"64K/256K/8M -> {got}", capsys)


def test_criterion_5_rollover(capsys):
    two_digit = wrapped_rollover(98, 5) and not wrapped_rollover(98, 99)
    bad_hits, repeats, hits, min_wraps = _oracle_sweep(small_config(timestamp_bits=8), N_TRACES)
    ok = two_digit and bad_hits == 0 and min_wraps >= 10 and hits > 0
    verdict(5, "rollover with 8-bit timestamps", ok,
            f"{N_TRACES} traces each spanning >= {min_wraps} wraps, wrongly granted={bad_hits}, "
            f"extra first accesses={repeats}, 2-digit example ok={two_digit}", capsys)


def test_criterion_6_sensitivity(capsys):
    events = gen_background(sensitivity_workload(seed=0))
    res = run_sensitivity(events, SimConfig(), [2 * MB, 4 * MB, 8 * MB])
    shares = [p.first_access_share_of_misses for p in res.points]
    monotone = all(b <= a for a, b in zip(shares, shares[1:]))
    identity = all(p.identity_holds for p in res.points)
    # MPKI(defense) - MPKI(baseline) == first-access misses per kilo-instruction, exactly in integers
    exact = all(p.llc_misses == p.llc_misses_baseline for p in res.points)
    close = all(abs((p.mpki_defense - p.mpki_baseline) - p.first_access_pki) < 1e-9 for p in res.points)
    fewer_evictions = res.points[-1].llc_evictions < res.points[0].llc_evictions
    ok = monotone and identity and exact and close and fewer_evictions
    verdict(6, "first-access share non-increasing with LLC size", ok,
            "shares " + ", ".join(f"{s:.4f}" for s in shares)
            + f" for 2M/4M/8M; identity on every run={identity and exact and close}", capsys)


def test_criterion_7_baseline_fidelity(capsys):
    cfg = small_config(defense=False)
    mismatches = 0
    compared = 0
    for seed in range(N_TRACES):
        events = fuzz_trace(50_000 + seed)
        ref = CacheHierarchy(cfg.hierarchy())
        res = simulate(events, cfg, record_outcomes=True)
        outcomes = iter(res.outcomes)
        for ev in events:
            if ev.op == "SCHED":
                continue
            if ev.op == "F":
                ref.flush(ev.addr)
                continue
            expect = ref.access(ev.addr, ev.op, ev.ctx)
            _, got = next(outcomes)
            compared += 1
            if (got.levels, got.latency) != (expect.levels, expect.latency):
                mismatches += 1
    ratios = []
    for seed in range(5):
        events = gen_background(BackgroundSpec(nprocs=1, footprint_lines=700, shared_lines=200,
                                               accesses=3000, seed=seed))
        ratios.append(run_overhead(events, small_config(switch_cost_charged=False)).overhead_ratio)
    ok = mismatches == 0 and all(r == 1.0 for r in ratios)
    verdict(7, "defense-off classifications match the plain cache model", ok,
            f"{N_TRACES} traces, {compared} accesses, mismatches={mismatches}; "
            f"single-process overhead ratios={sorted(set(ratios))}", capsys)


def _cli_outputs(tmp):
    def go(tag, *argv):
        out = tmp / tag
        code = cli.main([*argv, "--out", str(out)] if "--json" not in argv else list(argv))
        return code, out
    trace = tmp / "bg.trace"
    cli.main(["gen", "background", "--accesses", "3000", "--seed", "4", "--out", str(trace)])
    runs = [
        go("sim.csv", "simulate", str(trace)),
        go("sim.json", "simulate", str(trace), "--format", "json"),
        go("cmp.json", "compare", str(trace), "--format", "json"),
        go("sweep.csv", "sweep", "--sizes", "64K,128K,256K", "--accesses", "3000", "--seed", "2"),
        go("fuzz.trace", "gen", "fuzz", "--seed", "11"),
        (cli.main(["attack", "rsa", "--seed", "5", "--json", str(tmp / "rsa.json")]), tmp / "rsa.json"),
        (cli.main(["attack", "micro", "--json", str(tmp / "micro.json")]), tmp / "micro.json"),
    ]
    return trace.read_bytes(), [(code, path.name, path.read_bytes()) for code, path in runs]


def test_criterion_8_determinism(tmp_path, capsys):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    first = _cli_outputs(tmp_path / "a")
    second = _cli_outputs(tmp_path / "b")
    if capsys is not None:
        capsys.readouterr()
    codes_ok = all(code == 0 for code, _, _ in first[1])
    differing = [name for (_, name, x), (_, _, y) in zip(first[1], second[1]) if x != y]
    if first[0] != second[0]:
        differing.append("bg.trace")
    verdict(8, "byte-identical reports on repeat", codes_ok and not differing,
            f"{len(first[1]) + 1} outputs compared, differing={differing}", capsys)


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    failed = 0
    for fn in (test_criterion_1_security, test_criterion_2_comparator,
               test_criterion_3_first_access_accounting, test_criterion_4_switch_cost,
               test_criterion_5_rollover, test_criterion_6_sensitivity,
               test_criterion_7_baseline_fidelity):
        try:
            fn(None)
        except AssertionError:
            failed += 1
    with tempfile.TemporaryDirectory() as d:
        try:
            test_criterion_8_determinism(Path(d), None)
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
