"""TimeCache: first-access misses, per-process s-bits and switch timestamps.

The hierarchy here shares its data-array behavior with the baseline: a
first access sends its request down for timing only, so the received data is
discarded at every level below and neither fills nor reorders LRU there.
Residency is therefore identical with the defense on or off, and the defense
only ever adds first-access misses on top of the baseline miss stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cache import Cache, CacheStats, Evicted, HierarchyConfig, Outcome

SBITS_PER_TRANSACTION = 64 * 8  # s-bits moved by one 64-byte memory access


class SimulationFault(RuntimeError):
    pass


def sbit_copy_accesses(num_lines: int) -> int:
    """64-byte memory transactions needed to save or restore one s-bit row."""
    return math.ceil(num_lines / SBITS_PER_TRANSACTION)


def wrapped_rollover(ts: int, now_wrapped: int) -> bool:
    """Rollover test on wrapped values: current time smaller than Ts."""
    return now_wrapped < ts


@dataclass
class SwitchCostModel:
    sbit_copy_accesses: dict[str, int]
    compare_cycles: int
    memory_latency: int

    @classmethod
    def for_hierarchy(cls, config: HierarchyConfig) -> "SwitchCostModel":
        return cls(
            {g.name: sbit_copy_accesses(g.num_lines) for g in config.levels},
            config.timestamp_bits,
            config.memory.access_latency_cycles,
        )

    @property
    def cycles(self) -> int:
        copies = sum(self.sbit_copy_accesses.values())
        return 2 * copies * self.memory_latency + self.compare_cycles


@dataclass
class GlobalClock:
    timestamp_bits: int = 32
    now: int = 0

    def advance(self, cycles: int) -> None:
        if cycles < 0:
            raise ValueError("clock cannot run backwards")
        self.now += cycles

    def wrapped(self, t: int | None = None) -> int:
        return (self.now if t is None else t) & ((1 << self.timestamp_bits) - 1)

    def epoch(self, t: int | None = None) -> int:
        return (self.now if t is None else t) >> self.timestamp_bits


@dataclass
class ProcessRecord:
    pid: int
    ts: int = 0
    ts_cycle: int = 0
    saved_sbits: dict[str, np.ndarray] = field(default_factory=dict)
    ever_scheduled: bool = False


@dataclass
class DefenseOptions:
    defense: bool = True
    constant_time_flush: bool = False
    switch_cost_charged: bool = True


class TimeCacheHierarchy:
    def __init__(self, config: HierarchyConfig, options: DefenseOptions | None = None):
        self.config = config
        self.options = options or DefenseOptions()
        self.caches = [Cache(g, config.timestamp_bits) for g in config.levels]
        self.memory = config.memory
        self.num_contexts = config.levels[0].num_hw_contexts
        self.clock = GlobalClock(config.timestamp_bits)
        self.cost_model = SwitchCostModel.for_hierarchy(config)
        self.processes: dict[int, ProcessRecord] = {}
        self.running: dict[int, int] = {}  # ctx -> pid
        self.switches = 0
        self.switch_cycles = 0
        self.rollover_resets = 0
        self.reset_mask_bits = 0
        self._paths = {k: config.path(k) for k in ("I", "R")}
        self._listeners = []

    # -- observation hooks --------------------------------------------------

    def subscribe(self, callback) -> None:
        """``callback(event, level_index, address)`` on 'fill'/'evict' events."""
        self._listeners.append(callback)

    def _emit(self, event: str, idx: int, address: int) -> None:
        for cb in self._listeners:
            cb(event, idx, address)

    @property
    def now(self) -> int:
        return self.clock.now

    def process(self, pid: int) -> ProcessRecord:
        rec = self.processes.get(pid)
        if rec is None:
            rec = self.processes[pid] = ProcessRecord(pid)
        return rec

    def _check_ctx(self, ctx: int) -> None:
        if not 0 <= ctx < self.num_contexts:
            raise SimulationFault(f"unknown hardware context {ctx}")

    # -- context switches ---------------------------------------------------

    def context_switch(self, in_pid: int, ctx: int) -> int:
        """Schedule ``in_pid`` on ``ctx``, preempting whatever runs there."""
        self._check_ctx(ctx)
        out_pid = self.running.get(ctx)
        if out_pid == in_pid:
            return 0
        for other_ctx, pid in self.running.items():
            if pid == in_pid:
                raise SimulationFault(f"pid {in_pid} is already running on context {other_ctx}")
        self.running[ctx] = in_pid
        self.switches += 1
        if not self.options.defense:
            return 0

        if out_pid is not None:
            out = self.process(out_pid)
            out.saved_sbits = {c.name: c.array.save_row(ctx) for c in self.caches}
            out.ts = self.clock.wrapped()
            out.ts_cycle = self.now

        rec = self.process(in_pid)
        if not rec.ever_scheduled:
            for c in self.caches:
                c.array.clear_row(ctx)
            rec.ever_scheduled = True
        else:
            for c in self.caches:
                saved = rec.saved_sbits.get(c.name)
                if saved is None:
                    c.array.clear_row(ctx)
                else:
                    # invalid lines carry no s-bits
                    c.array.restore_row(ctx, saved & c.valid)
            rolled = wrapped_rollover(rec.ts, self.clock.wrapped()) or (
                self.clock.epoch() != self.clock.epoch(rec.ts_cycle)
            )
            if rolled:
                self.rollover_resets += 1
                for c in self.caches:
                    c.array.clear_row(ctx)
            else:
                for c in self.caches:
                    self.reset_mask_bits += int(c.array.compare_and_reset(rec.ts, ctx).sum())

        cost = self.cost_model.cycles
        if self.options.switch_cost_charged:
            self.clock.advance(cost)
            self.switch_cycles += cost
        return cost

    def check_scheduled(self, pid: int, ctx: int) -> None:
        self._check_ctx(ctx)
        if self.running.get(ctx) != pid:
            raise SimulationFault(f"pid {pid} is not scheduled on context {ctx}")

    # -- accesses -----------------------------------------------------------

    def _writeback(self, evicted: Evicted | None, below: list[int]) -> int:
        if evicted is None or not evicted.dirty:
            return 0
        for idx in below:
            cache = self.caches[idx]
            col = cache.find(evicted.address)
            if col is not None:
                cache.mark_dirty(col)
                return cache.hit_latency
        return self.memory.access_latency_cycles

    def access(self, pid: int, ctx: int, address: int, kind: str = "R") -> Outcome:
        if self.running.get(ctx) != pid:
            self.check_scheduled(pid, ctx)
        path = self._paths["I" if kind == "I" else "R"]
        caches = self.caches
        classes = ["absent"] * len(caches)

        # topmost level holding the line: where the baseline would be served
        present = None
        col = None
        for depth, idx in enumerate(path):
            col = caches[idx].find(address)
            if col is not None:
                present = depth
                break

        missed = path if present is None else path[:present]
        for idx in missed:
            caches[idx].stats.misses += 1
            classes[idx] = "miss"

        serving = None  # level index that services the request, None for memory
        if present is not None:
            idx = path[present]
            cache = caches[idx]
            cache.touch(col)
            sbits = cache.array._s[ctx]
            if not self.options.defense or sbits[col]:
                cache.stats.hits += 1
                classes[idx] = "hit"
                serving = idx
            else:
                cache.stats.first_access_misses += 1
                classes[idx] = "first_access_miss"
                sbits[col] = 1
                # timing-only request down the hierarchy; data discarded below
                for idx in path[present + 1:]:
                    lower = caches[idx]
                    lcol = lower.find(address)
                    if lcol is None:
                        continue
                    lbits = lower.array._s[ctx]
                    if lbits[lcol]:
                        lower.stats.hits += 1
                        classes[idx] = "hit"
                        serving = idx
                        break
                    lower.stats.first_access_misses += 1
                    classes[idx] = "first_access_miss"
                    lbits[lcol] = 1

        if serving is None:
            latency = self.memory.access_latency_cycles
            serviced_by = "memory"
        else:
            latency = caches[serving].hit_latency
            serviced_by = caches[serving].name

        done = self.clock.now + latency
        wb = 0
        for depth in range(len(missed) - 1, -1, -1):
            idx = missed[depth]
            evicted = caches[idx].fill(address, ctx, done)
            if self._listeners:
                if evicted is not None:
                    self._emit("evict", idx, evicted.address)
                self._emit("fill", idx, address)
            if evicted is not None and evicted.dirty:
                wb += self._writeback(evicted, path[depth + 1:])
        if kind == "W":
            top = caches[path[0]]
            top.mark_dirty(top.find(address))
        self.clock.now = done + wb
        return Outcome(classes, latency, serviced_by, wb)

    def flush(self, address: int) -> int:
        """Invalidate ``address`` at every level; returns the flush latency."""
        found = []
        dirty = False
        for idx, cache in enumerate(self.caches):
            evicted = cache.flush(address)
            if evicted is not None:
                self._emit("evict", idx, evicted.address)
                found.append(idx)
                dirty |= evicted.dirty
        base = self.caches[0].hit_latency
        if self.options.constant_time_flush:
            latency = base + sum(c.hit_latency for c in self.caches) + self.memory.access_latency_cycles
        else:
            latency = base + sum(self.caches[i].hit_latency for i in found)
            if dirty:
                latency += self.memory.access_latency_cycles
        self.clock.advance(latency)
        return latency

    def stats(self) -> dict[str, CacheStats]:
        return {c.name: c.stats for c in self.caches}
