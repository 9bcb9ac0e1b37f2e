"""Simulator configuration: cache geometry, latencies and defense flags.

Config files are JSON objects. Every field is optional::

    {
      "schema_version": 1,
      "num_hw_contexts": 2,
      "timestamp_bits": 32,
      "memory_latency": 200,
      "defense": true,
      "constant_time_flush": false,
      "switch_cost_charged": true,
      "levels": [
        {"name": "L1I", "size": 32768, "line_size": 64, "assoc": 8,
         "hit_latency": 2, "role": "instruction"},
        {"name": "L1D", "size": 32768, "line_size": 64, "assoc": 8,
         "hit_latency": 2, "role": "data"},
        {"name": "LLC", "size": 2097152, "line_size": 64, "assoc": 16,
         "hit_latency": 20, "role": "unified"}
      ]
    }

Sizes also accept strings with a K/M suffix ("32K", "2M").
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .cache import CacheGeometry, GeometryError, HierarchyConfig, MemoryModel
from .defense import DefenseOptions

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def parse_size(value) -> int:
    if isinstance(value, bool):
        raise ValueError(f"not a size: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        text = value.strip().upper().removesuffix("B")
        scale = 1
        if text.endswith("K"):
            scale, text = 1 << 10, text[:-1]
        elif text.endswith("M"):
            scale, text = 1 << 20, text[:-1]
        elif text.endswith("G"):
            scale, text = 1 << 30, text[:-1]
        return int(text, 0) * scale
    raise ValueError(f"not a size: {value!r}")


@dataclass(frozen=True)
class LevelConfig:
    name: str
    size: int
    line_size: int = 64
    assoc: int = 8
    hit_latency: int = 2
    role: str = "unified"


def default_levels() -> list[LevelConfig]:
    return [
        LevelConfig("L1I", 32 << 10, 64, 8, 2, "instruction"),
        LevelConfig("L1D", 32 << 10, 64, 8, 2, "data"),
        LevelConfig("LLC", 2 << 20, 64, 16, 20, "unified"),
    ]


@dataclass(frozen=True)
class SimConfig:
    levels: tuple[LevelConfig, ...] = field(default_factory=lambda: tuple(default_levels()))
    memory_latency: int = 200
    num_hw_contexts: int = 2
    timestamp_bits: int = 32
    defense: bool = True
    constant_time_flush: bool = False
    switch_cost_charged: bool = True

    def __post_init__(self) -> None:
        self.validate()

    def geometries(self) -> list[CacheGeometry]:
        return [
            CacheGeometry(lv.name, lv.size, lv.line_size, lv.assoc, lv.hit_latency,
                          lv.role, self.num_hw_contexts)
            for lv in self.levels
        ]

    def validate(self) -> None:
        if not self.levels:
            raise ConfigError("levels: at least one cache level is required")
        for name in ("memory_latency", "num_hw_contexts", "timestamp_bits"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ConfigError(f"{name}: must be a positive integer, got {value!r}")
        if self.timestamp_bits > 64:
            raise ConfigError("timestamp_bits: at most 64")
        for name in ("defense", "constant_time_flush", "switch_cost_charged"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name}: must be true or false")
        names = [lv.name for lv in self.levels]
        if len(set(names)) != len(names):
            raise ConfigError(f"levels: duplicate level names in {names}")
        try:
            geoms = self.geometries()
        except GeometryError as exc:
            raise ConfigError(f"levels.{exc}") from None
        seen_unified = False
        for g in geoms:
            if g.role == "unified":
                seen_unified = True
            elif seen_unified:
                raise ConfigError(f"levels.{g.name}.role: split L1 levels must precede unified levels")
        for kind in ("I", "R"):
            path = self.hierarchy().path(kind)
            if not path:
                raise ConfigError(f"levels: no level serves {'instruction' if kind == 'I' else 'data'} accesses")
            latencies = [geoms[i].hit_latency_cycles for i in path]
            if latencies != sorted(latencies):
                raise ConfigError("levels: hit latencies must not decrease down the hierarchy")
        worst = max(g.hit_latency_cycles for g in geoms)
        if self.memory_latency <= worst:
            raise ConfigError(
                f"memory_latency: must exceed every cache hit latency (max {worst}), got {self.memory_latency}"
            )

    def hierarchy(self) -> HierarchyConfig:
        return HierarchyConfig(self.geometries(), MemoryModel(self.memory_latency), self.timestamp_bits)

    def options(self) -> DefenseOptions:
        return DefenseOptions(self.defense, self.constant_time_flush, self.switch_cost_charged)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def with_llc_size(self, size: int) -> "SimConfig":
        levels = list(self.levels)
        levels[-1] = dataclasses.replace(levels[-1], size=size)
        return self.replace(levels=tuple(levels))

    @property
    def l1_hit_latency(self) -> int:
        return min(lv.hit_latency for lv in self.levels)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "num_hw_contexts": self.num_hw_contexts,
            "timestamp_bits": self.timestamp_bits,
            "memory_latency": self.memory_latency,
            "defense": self.defense,
            "constant_time_flush": self.constant_time_flush,
            "switch_cost_charged": self.switch_cost_charged,
            "levels": [dataclasses.asdict(lv) for lv in self.levels],
        }


_TOP_KEYS = {"schema_version", "num_hw_contexts", "timestamp_bits", "memory_latency", "defense",
             "constant_time_flush", "switch_cost_charged", "levels"}
_LEVEL_KEYS = {f.name for f in dataclasses.fields(LevelConfig)}


def config_from_dict(data: dict) -> SimConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown field")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported version {version!r}")
    kwargs = {k: v for k, v in data.items() if k not in ("schema_version", "levels")}
    if "levels" in data:
        if not isinstance(data["levels"], list):
            raise ConfigError("levels: must be a list")
        levels = []
        for i, raw in enumerate(data["levels"]):
            if not isinstance(raw, dict):
                raise ConfigError(f"levels[{i}]: must be an object")
            unknown = set(raw) - _LEVEL_KEYS
            if unknown:
                raise ConfigError(f"levels[{i}].{sorted(unknown)[0]}: unknown field")
            if "name" not in raw or "size" not in raw:
                raise ConfigError(f"levels[{i}]: 'name' and 'size' are required")
            entry = dict(raw)
            for key in ("size", "line_size"):
                if key in entry:
                    try:
                        entry[key] = parse_size(entry[key])
                    except ValueError as exc:
                        raise ConfigError(f"levels[{i}].{key}: {exc}") from None
            levels.append(LevelConfig(**entry))
        kwargs["levels"] = tuple(levels)
    return SimConfig(**kwargs)


def load_config(path: str | Path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data)
