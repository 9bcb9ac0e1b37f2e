"""Replays an event list through a :class:`TimeCacheHierarchy`."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from .cache import CacheStats, Outcome
from .config import SimConfig
from .defense import TimeCacheHierarchy
from .trace import ACCESS_OPS, AccessEvent


@dataclass(frozen=True)
class ProbeRecord:
    seq: int
    pid: int
    addr: int
    latency: int


@dataclass
class RunResult:
    config: SimConfig
    level_names: list[str]
    level_stats: dict[str, CacheStats]
    instructions: int
    cycles: int
    events: int
    flushes: int
    switches: int
    switch_cycles: int
    rollover_resets: int
    probes: list[ProbeRecord] = field(default_factory=list)
    outcomes: list[tuple[AccessEvent, Outcome]] | None = None

    def mpki(self, level: str) -> float:
        st = self.level_stats[level]
        if not self.instructions:
            return 0.0
        return (st.misses + st.first_access_misses) * 1000 / self.instructions

    def first_access_pki(self, level: str) -> float:
        if not self.instructions:
            return 0.0
        return self.level_stats[level].first_access_misses * 1000 / self.instructions

    def first_access_fraction(self, level: str) -> float:
        st = self.level_stats[level]
        total = st.hits + st.misses + st.first_access_misses
        return st.first_access_misses / total if total else 0.0

    def first_access_share_of_misses(self, level: str) -> float:
        st = self.level_stats[level]
        total = st.misses + st.first_access_misses
        return st.first_access_misses / total if total else 0.0


OutcomeHook = Callable[[AccessEvent, Outcome], None]


def simulate(
    events: Iterable[AccessEvent],
    config: SimConfig,
    *,
    record_outcomes: bool = False,
    on_outcome: OutcomeHook | None = None,
    hierarchy: TimeCacheHierarchy | None = None,
) -> RunResult:
    """Run ``events`` and return statistics.

    Every R/W/I/F/PROBE event counts as one instruction. PROBE latencies are
    logged for the attacker. ``hierarchy`` lets callers pre-attach observers.
    """
    h = hierarchy or TimeCacheHierarchy(config.hierarchy(), config.options())
    outcomes: list[tuple[AccessEvent, Outcome]] | None = [] if record_outcomes else None
    probes: list[ProbeRecord] = []
    instructions = flushes = count = 0
    for ev in events:
        count += 1
        if ev.op == "SCHED":
            h.context_switch(ev.pid, ev.ctx)
            continue
        instructions += 1
        if ev.op == "F":
            h.check_scheduled(ev.pid, ev.ctx)
            h.flush(ev.addr)
            flushes += 1
            continue
        assert ev.op in ACCESS_OPS
        out = h.access(ev.pid, ev.ctx, ev.addr, ev.op)
        if ev.op == "PROBE":
            probes.append(ProbeRecord(ev.seq, ev.pid, ev.addr, out.latency))
        if outcomes is not None:
            outcomes.append((ev, out))
        if on_outcome is not None:
            on_outcome(ev, out)
    return RunResult(
        config=config,
        level_names=[c.name for c in h.caches],
        level_stats={c.name: c.stats for c in h.caches},
        instructions=instructions,
        cycles=h.now,
        events=count,
        flushes=flushes,
        switches=h.switches,
        switch_cycles=h.switch_cycles,
        rollover_resets=h.rollover_resets,
        probes=probes,
        outcomes=outcomes,
    )
