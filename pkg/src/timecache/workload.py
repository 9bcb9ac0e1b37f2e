"""Synthetic scenario generators.

All generators are pure functions of their arguments (and seed) and return
events that pass :func:`timecache.trace.validate`.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .trace import AccessEvent

LINE = 64
SHARED_BASE = 0x7F00_0000_0000
PRIVATE_BASE = 0x1000_0000
PRIVATE_STRIDE = 0x1000_0000


@dataclass(frozen=True)
class Scenario:
    """An attack trace plus what the attacker is trying to learn.

    The i-th PROBE on an address in ``monitored`` decodes ``ground_truth[i]``.
    """
    name: str
    events: list[AccessEvent]
    monitored: frozenset[int]
    ground_truth: tuple[int, ...]
    attacker_pid: int


class _Builder:
    def __init__(self) -> None:
        self.events: list[AccessEvent] = []

    def add(self, pid: int, ctx: int, op: str, addr: int | None = None) -> None:
        self.events.append(AccessEvent(len(self.events) + 1, pid, ctx, op, addr))


@dataclass(frozen=True)
class SchedulePolicy:
    """How processes sharing one context are interleaved.

    ``round_robin`` switches after ``slice_accesses`` events of the running
    process; ``explicit`` leaves SCHED placement to the caller.
    """
    mode: str = "round_robin"
    slice_accesses: int = 2000

    def __post_init__(self) -> None:
        if self.mode not in ("explicit", "round_robin"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.slice_accesses <= 0:
            raise ValueError("slice_accesses must be positive")


def interleave(streams: dict[int, Sequence[tuple[str, int]]], policy: SchedulePolicy,
               ctx: int = 0) -> list[AccessEvent]:
    """Round-robin per-process ``(op, addr)`` streams onto one context."""
    if policy.mode != "round_robin":
        raise ValueError("interleave needs a round_robin policy")
    b = _Builder()
    cursors = {pid: 0 for pid in streams}
    order = sorted(streams)
    while any(cursors[p] < len(streams[p]) for p in order):
        for pid in order:
            pos = cursors[pid]
            chunk = streams[pid][pos:pos + policy.slice_accesses]
            if not chunk:
                continue
            b.add(pid, ctx, "SCHED")
            for op, addr in chunk:
                b.add(pid, ctx, op, addr)
            cursors[pid] = pos + len(chunk)
    return b.events


def gen_microbenchmark(lines: int = 256, victim_touches: Iterable[int] | None = None, *,
                       base: int = SHARED_BASE, attacker_pid: int = 1, victim_pid: int = 2,
                       ctx: int = 0, victim_repeats: int = 2) -> Scenario:
    """Flush the shared array, let the victim write to part of it, time every line."""
    touched = sorted(set(range(lines) if victim_touches is None else victim_touches))
    if touched and not (0 <= touched[0] and touched[-1] < lines):
        raise ValueError("victim_touches must be a subset of range(lines)")
    addrs = [base + i * LINE for i in range(lines)]
    b = _Builder()
    b.add(attacker_pid, ctx, "SCHED")
    for a in addrs:
        b.add(attacker_pid, ctx, "F", a)
    b.add(victim_pid, ctx, "SCHED")
    for _ in range(victim_repeats):
        for i in touched:
            b.add(victim_pid, ctx, "W", addrs[i])
    b.add(attacker_pid, ctx, "SCHED")
    for a in addrs:
        b.add(attacker_pid, ctx, "PROBE", a)
    truth = set(touched)
    return Scenario("micro", b.events, frozenset(addrs),
                    tuple(int(i in truth) for i in range(lines)), attacker_pid)


def random_key(bits: int, seed: int) -> str:
    rng = random.Random(seed)
    return "".join(rng.choice("01") for _ in range(bits))


@dataclass(frozen=True)
class RsaVictimSpec:
    key_bits: str
    square_addr: int = SHARED_BASE + 0x10000
    multiply_addr: int = SHARED_BASE + 0x11040
    reduce_addr: int = SHARED_BASE + 0x12080
    iterations_per_bit: int = 1
    same_context: bool = False

    def __post_init__(self) -> None:
        if not self.key_bits or set(self.key_bits) - {"0", "1"}:
            raise ValueError("key_bits must be a non-empty string of 0/1")
        lines = {a // LINE for a in (self.square_addr, self.multiply_addr, self.reduce_addr)}
        if len(lines) != 3:
            raise ValueError("square, multiply and reduce must map to distinct cache lines")
        if self.iterations_per_bit <= 0:
            raise ValueError("iterations_per_bit must be positive")


def gen_rsa_attack(spec: RsaVictimSpec, *, attacker_pid: int = 1, victim_pid: int = 2) -> Scenario:
    """Flush+reload against square-reduce[-multiply-reduce] exponentiation.

    One round per key bit: the attacker flushes the three function lines, the
    victim processes the bit, the attacker probes the three lines.
    """
    actx, vctx = (0, 0) if spec.same_context else (0, 1)
    sq, mul, red = spec.square_addr, spec.multiply_addr, spec.reduce_addr
    b = _Builder()
    b.add(attacker_pid, actx, "SCHED")
    if not spec.same_context:
        b.add(victim_pid, vctx, "SCHED")
    for bit in spec.key_bits:
        if spec.same_context:
            b.add(attacker_pid, actx, "SCHED")
        for a in (sq, mul, red):
            b.add(attacker_pid, actx, "F", a)
        if spec.same_context:
            b.add(victim_pid, vctx, "SCHED")
        for _ in range(spec.iterations_per_bit):
            seq = (sq, red, mul, red) if bit == "1" else (sq, red)
            for a in seq:
                b.add(victim_pid, vctx, "I", a)
        if spec.same_context:
            b.add(attacker_pid, actx, "SCHED")
        for a in (sq, mul, red):
            b.add(attacker_pid, actx, "PROBE", a)
    return Scenario("rsa", b.events, frozenset({mul}),
                    tuple(int(c) for c in spec.key_bits), attacker_pid)


@dataclass(frozen=True)
class BackgroundSpec:
    nprocs: int = 2
    footprint_lines: int = 4096      # private lines per process
    shared_lines: int = 1024         # shared-library region touched by everyone
    accesses: int = 50_000           # per process
    shared_fraction: float = 0.3
    write_fraction: float = 0.1
    hot_fraction: float = 0.0        # share of private accesses that go to a hot subset
    hot_lines: int = 0
    shared_pattern: str = "uniform"  # or "sweep": every process walks the region in order
    seed: int = 0
    policy: SchedulePolicy = field(default_factory=SchedulePolicy)


def gen_background(spec: BackgroundSpec) -> list[AccessEvent]:
    """Mixed multi-process workload time-sharing hardware context 0.

    Each process draws from its private region (uniformly, or from a hot
    subset with probability ``hot_fraction``) and from a shared region common
    to all processes. Shared lines are drawn uniformly, or with ``sweep``
    each process walks the shared region in address order, like several
    instances of one program executing the same code. A dedicated RNG stream per process keeps each stream independent
    of ``nprocs``.
    """
    if spec.nprocs <= 0 or spec.accesses < 0 or spec.footprint_lines <= 0:
        raise ValueError("nprocs and footprint_lines must be positive, accesses non-negative")
    if spec.shared_lines < 0 or not 0 <= spec.shared_fraction <= 1:
        raise ValueError("bad shared region parameters")
    if spec.shared_lines == 0 and spec.shared_fraction > 0:
        raise ValueError("shared_fraction > 0 needs shared_lines > 0")
    if spec.shared_pattern not in ("uniform", "sweep"):
        raise ValueError(f"unknown shared_pattern {spec.shared_pattern!r}")
    streams: dict[int, list[tuple[str, int]]] = {}
    for p in range(spec.nprocs):
        pid = p + 1
        rng = random.Random(f"{spec.seed}:{pid}")
        private = PRIVATE_BASE + p * PRIVATE_STRIDE
        stream = []
        cursor = 0
        for _ in range(spec.accesses):
            r = rng.random()
            if r < spec.shared_fraction:
                if spec.shared_pattern == "sweep":
                    line, cursor = cursor, (cursor + 1) % spec.shared_lines
                else:
                    line = rng.randrange(spec.shared_lines)
                addr = SHARED_BASE + line * LINE
            elif spec.hot_lines and rng.random() < spec.hot_fraction:
                addr = private + rng.randrange(spec.hot_lines) * LINE
            else:
                addr = private + rng.randrange(spec.footprint_lines) * LINE
            op = "W" if rng.random() < spec.write_fraction else "R"
            stream.append((op, addr))
        streams[pid] = stream
    return interleave(streams, spec.policy)


def sensitivity_workload(seed: int = 0, sweeps: int = 2) -> BackgroundSpec:
    """Two processes over a 3 MB shared region and 2 MB private regions each.

    The shared region is walked in lockstep by both processes; it thrashes a
    2 MB LLC, partly fits 4 MB and fully fits 8 MB. Private accesses mostly
    hit a small hot set, and the rest scatter over the private regions.
    """
    mb_lines = (1 << 20) // LINE
    shared = 3 * mb_lines
    return BackgroundSpec(nprocs=2, footprint_lines=2 * mb_lines, shared_lines=shared,
                          accesses=int(sweeps * shared / 0.4), shared_fraction=0.4,
                          hot_lines=1024, hot_fraction=0.9, shared_pattern="sweep", seed=seed,
                          policy=SchedulePolicy(slice_accesses=8000))


def gen_fuzz(seed: int, *, length: int = 60, nprocs: int = 3, ncontexts: int = 2,
             addresses: Sequence[int] | None = None, flush_prob: float = 0.1,
             sched_prob: float = 0.15) -> list[AccessEvent]:
    """Random multi-process, multi-context trace over a small address pool."""
    rng = random.Random(seed)
    pool = list(addresses) if addresses is not None else [SHARED_BASE + i * LINE for i in range(12)]
    b = _Builder()
    running: dict[int, int] = {}
    pids = list(range(1, nprocs + 1))

    def schedule(ctx: int) -> None:
        idle = [p for p in pids if p not in running.values() or running.get(ctx) == p]
        pid = rng.choice(idle)
        running[ctx] = pid
        b.add(pid, ctx, "SCHED")

    for ctx in range(min(ncontexts, nprocs)):
        schedule(ctx)
    while len(b.events) < length:
        ctx = rng.choice(sorted(running))
        r = rng.random()
        if r < sched_prob:
            schedule(ctx)
            continue
        addr = rng.choice(pool)
        if r < sched_prob + flush_prob:
            op = "F"
        else:
            op = rng.choice(("R", "R", "W", "I", "PROBE"))
        b.add(running[ctx], ctx, op, addr)
    return b.events
