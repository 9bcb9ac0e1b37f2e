"""Set-associative, write-back, write-allocate caches with strict LRU.

Per-line load timestamps and s-bits live in a :class:`TransposeArray` owned by
each cache, so the defense layer and the comparator operate on the same bits
the cache fills and invalidates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .bitserial import TransposeArray

ROLES = ("instruction", "data", "unified")


class GeometryError(ValueError):
    pass


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class CacheGeometry:
    name: str
    total_size_bytes: int
    line_size_bytes: int = 64
    associativity: int = 8
    hit_latency_cycles: int = 2
    role: str = "unified"
    num_hw_contexts: int = 2

    def __post_init__(self) -> None:
        for fld in ("total_size_bytes", "line_size_bytes", "associativity",
                    "hit_latency_cycles", "num_hw_contexts"):
            value = getattr(self, fld)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise GeometryError(f"{self.name}.{fld}: must be a positive integer, got {value!r}")
        if not _is_pow2(self.line_size_bytes):
            raise GeometryError(f"{self.name}.line_size_bytes: must be a power of two")
        if self.total_size_bytes % (self.line_size_bytes * self.associativity):
            raise GeometryError(
                f"{self.name}.total_size_bytes: {self.total_size_bytes} is not divisible by "
                f"line_size_bytes * associativity = {self.line_size_bytes * self.associativity}"
            )
        if not _is_pow2(self.num_sets):
            raise GeometryError(f"{self.name}: number of sets ({self.num_sets}) must be a power of two")
        if self.role not in ROLES:
            raise GeometryError(f"{self.name}.role: must be one of {ROLES}, got {self.role!r}")

    @property
    def num_lines(self) -> int:
        return self.total_size_bytes // self.line_size_bytes

    @property
    def num_sets(self) -> int:
        return self.total_size_bytes // (self.line_size_bytes * self.associativity)


@dataclass(frozen=True)
class MemoryModel:
    access_latency_cycles: int = 200


class Evicted(NamedTuple):
    address: int
    dirty: bool


class CacheLine(NamedTuple):
    """Snapshot of one way's metadata."""
    tag: int
    valid: bool
    dirty: bool
    lru_age: int  # 0 = most recently used
    tc: int
    s_bits: tuple[bool, ...]


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    first_access_misses: int = 0
    fills: int = 0
    evictions: int = 0
    writebacks: int = 0
    invalidations: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class Cache:
    def __init__(self, geometry: CacheGeometry, timestamp_bits: int = 32):
        self.geometry = geometry
        g = geometry
        self.name = g.name
        self.num_sets = g.num_sets
        self.assoc = g.associativity
        self.hit_latency = g.hit_latency_cycles
        self._offset_bits = g.line_size_bytes.bit_length() - 1
        self._set_mask = self.num_sets - 1
        n = g.num_lines
        # column = set_index * assoc + way; blocks[col] is the line number held there
        self.blocks: list[int | None] = [None] * n
        self.dirty = bytearray(n)
        self._where: dict[int, int] = {}
        # per-set columns, least recently used first
        self._lru: list[list[int]] = [[] for _ in range(self.num_sets)]
        self._free: list[list[int]] = [
            list(range((s + 1) * self.assoc - 1, s * self.assoc - 1, -1)) for s in range(self.num_sets)
        ]
        self.array = TransposeArray(n, timestamp_bits, g.num_hw_contexts)
        self._valid = bytearray(n)
        self.valid = np.frombuffer(self._valid, dtype=bool)
        self.stats = CacheStats()

    def line_address(self, address: int) -> int:
        return (address >> self._offset_bits) << self._offset_bits

    def set_index(self, address: int) -> int:
        return (address >> self._offset_bits) & self._set_mask

    def column(self, set_index: int, way: int) -> int:
        return set_index * self.assoc + way

    def locate(self, column: int) -> tuple[int, int]:
        return divmod(column, self.assoc)

    def address_of(self, column: int) -> int:
        block = self.blocks[column]
        assert block is not None
        return block << self._offset_bits

    def find(self, address: int) -> int | None:
        """Column holding ``address``, or None."""
        return self._where.get(address >> self._offset_bits)

    def lookup(self, address: int) -> tuple[int, int] | None:
        col = self._where.get(address >> self._offset_bits)
        return None if col is None else divmod(col, self.assoc)

    def touch(self, column: int) -> None:
        order = self._lru[column // self.assoc]
        if order[-1] != column:
            order.remove(column)
            order.append(column)

    def fill(self, address: int, ctx: int, now: int, dirty: bool = False) -> Evicted | None:
        block = address >> self._offset_bits
        if block in self._where:
            raise ValueError(f"{self.name}: fill of resident address {address:#x}")
        set_index = block & self._set_mask
        free = self._free[set_index]
        evicted = None
        if free:
            col = free.pop()
        else:
            col = self._lru[set_index][0]
            evicted = self.invalidate(col)
            self._free[set_index].pop()
            self.stats.evictions += 1
        self.blocks[col] = block
        self.dirty[col] = dirty
        self._where[block] = col
        self._lru[set_index].append(col)
        self._valid[col] = 1
        self.array.write_tc(col, now)
        self.array.set_sbits_onehot(col, ctx)
        self.stats.fills += 1
        return evicted

    def invalidate(self, column: int) -> Evicted | None:
        block = self.blocks[column]
        if block is None:
            return None
        evicted = Evicted(block << self._offset_bits, bool(self.dirty[column]))
        del self._where[block]
        set_index = block & self._set_mask
        self._lru[set_index].remove(column)
        self._free[set_index].append(column)
        self.blocks[column] = None
        self.dirty[column] = 0
        self._valid[column] = 0
        self.array.clear_sbits(column)
        if evicted.dirty:
            self.stats.writebacks += 1
        return evicted

    def flush(self, address: int) -> Evicted | None:
        col = self.find(address)
        if col is None:
            return None
        self.stats.invalidations += 1
        return self.invalidate(col)

    def mark_dirty(self, column: int) -> None:
        self.dirty[column] = 1

    def line(self, set_index: int, way: int) -> CacheLine:
        col = self.column(set_index, way)
        block = self.blocks[col]
        order = self._lru[set_index]
        age = len(order) - 1 - order.index(col) if col in order else self.assoc
        return CacheLine(
            tag=-1 if block is None else block >> (self.num_sets.bit_length() - 1),
            valid=block is not None,
            dirty=bool(self.dirty[col]),
            lru_age=age,
            tc=self.array.read_tc(col),
            s_bits=self.array.read_sbits(col),
        )

    def lru_order(self, set_index: int) -> list[int]:
        """Addresses resident in ``set_index``, least recently used first."""
        return [self.address_of(c) for c in self._lru[set_index]]

    def valid_mask(self) -> np.ndarray:
        return self.valid.copy()

    def resident(self) -> set[int]:
        return {block << self._offset_bits for block in self._where}

    def resident_count(self) -> int:
        return len(self._where)


@dataclass
class Outcome:
    """Per-level classification and latency of one access.

    ``levels`` is aligned with the hierarchy's level list. Classes are
    ``hit``, ``miss``, ``first_access_miss`` and ``absent`` (level not on the
    access path, not consulted, or consulted only as a pass-through without
    the line).
    """
    levels: list[str]
    latency: int
    serviced_by: str
    writeback_cycles: int = 0

    @property
    def total_latency(self) -> int:
        return self.latency + self.writeback_cycles


@dataclass
class HierarchyConfig:
    levels: list[CacheGeometry]
    memory: MemoryModel = field(default_factory=MemoryModel)
    timestamp_bits: int = 32

    def path(self, kind: str) -> list[int]:
        """Indices of the levels an access of ``kind`` ('I' or data) traverses."""
        want = "instruction" if kind == "I" else "data"
        return [i for i, g in enumerate(self.levels) if g.role in (want, "unified")]


class CacheHierarchy:
    """Plain non-inclusive hierarchy without any defense.

    Serves as the cache-core reference: classifications are only ``hit``,
    ``miss`` and ``absent``.
    """

    def __init__(self, config: HierarchyConfig):
        self.config = config
        self.caches = [Cache(g, config.timestamp_bits) for g in config.levels]
        self.memory = config.memory
        self._paths = {k: config.path(k) for k in ("I", "R")}
        self.now = 0

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

    def access(self, address: int, kind: str = "R", ctx: int = 0) -> Outcome:
        path = self._paths["I" if kind == "I" else "R"]
        classes = ["absent"] * len(self.caches)
        serving = None
        for depth, idx in enumerate(path):
            cache = self.caches[idx]
            col = cache.find(address)
            if col is not None:
                cache.touch(col)
                cache.stats.hits += 1
                classes[idx] = "hit"
                serving = depth
                break
            cache.stats.misses += 1
            classes[idx] = "miss"
        if serving is None:
            latency = self.memory.access_latency_cycles
            serviced_by = "memory"
            missed = path
        else:
            idx = path[serving]
            latency = self.caches[idx].hit_latency
            serviced_by = self.caches[idx].name
            missed = path[:serving]
        done = self.now + latency
        wb = 0
        for depth in range(len(missed) - 1, -1, -1):
            idx = missed[depth]
            evicted = self.caches[idx].fill(address, ctx, done)
            wb += self._writeback(evicted, path[depth + 1:])
        if kind == "W":
            top = self.caches[path[0]]
            top.mark_dirty(top.find(address))
        self.now = done + wb
        return Outcome(classes, latency, serviced_by, wb)

    def flush(self, address: int) -> None:
        for cache in self.caches:
            cache.flush(address)
