"""Paired baseline/TimeCache experiments."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .config import SimConfig
from .simulator import RunResult, simulate
from .trace import AccessEvent
from .workload import Scenario


class HarnessError(ValueError):
    pass


def default_threshold(config: SimConfig) -> float:
    return (config.l1_hit_latency + config.memory_latency) / 2


def config_pair(config: SimConfig) -> tuple[SimConfig, SimConfig]:
    return config.replace(defense=False), config.replace(defense=True)


@dataclass
class LeakageReport:
    label: str
    latencies: list[int]
    hit_threshold_cycles: float
    inferred_bits: list[int]
    ground_truth_bits: list[int]
    hits_observed: int

    @property
    def accuracy(self) -> float:
        if not self.ground_truth_bits:
            return 0.0
        matches = sum(a == b for a, b in zip(self.inferred_bits, self.ground_truth_bits))
        return matches / len(self.ground_truth_bits)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "hit_threshold_cycles": self.hit_threshold_cycles,
            "probes": len(self.latencies),
            "hits_observed": self.hits_observed,
            "accuracy": self.accuracy,
            "inferred_bits": "".join(map(str, self.inferred_bits)),
            "ground_truth_bits": "".join(map(str, self.ground_truth_bits)),
            "latencies": self.latencies,
        }


def leakage(result: RunResult, scenario: Scenario, threshold: float, label: str) -> LeakageReport:
    probes = [p for p in result.probes if p.pid == scenario.attacker_pid]
    latencies = [p.latency for p in probes]
    inferred = [int(p.latency < threshold) for p in probes if p.addr in scenario.monitored]
    return LeakageReport(
        label=label,
        latencies=latencies,
        hit_threshold_cycles=threshold,
        inferred_bits=inferred,
        ground_truth_bits=list(scenario.ground_truth),
        hits_observed=sum(lat < threshold for lat in latencies),
    )


def _paired(events: Sequence[AccessEvent], baseline: SimConfig, defense: SimConfig,
            parallel: bool = False) -> tuple[RunResult, RunResult]:
    if parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fb = pool.submit(simulate, events, baseline)
            fd = pool.submit(simulate, events, defense)
            return fb.result(), fd.result()
    return simulate(events, baseline), simulate(events, defense)


def run_attack(scenario: Scenario, config: SimConfig, threshold: float | None = None
               ) -> tuple[LeakageReport, LeakageReport]:
    if not any(ev.op == "PROBE" for ev in scenario.events):
        raise HarnessError(f"scenario {scenario.name!r} has no PROBE events")
    if threshold is None:
        threshold = default_threshold(config)
    base_cfg, def_cfg = config_pair(config)
    base, dfn = _paired(scenario.events, base_cfg, def_cfg)
    return (leakage(base, scenario, threshold, "baseline"),
            leakage(dfn, scenario, threshold, "timecache"))


@dataclass
class LevelOverhead:
    level: str
    mpki_baseline: float
    mpki_defense: float
    first_access_pki: float
    first_access_fraction: float
    first_access_share_of_misses: float
    misses_baseline: int
    misses_defense: int
    first_access_misses: int
    evictions: int

    @property
    def identity_holds(self) -> bool:
        """MPKI(defense) - MPKI(baseline) equals first-access misses per kilo-instruction."""
        return self.misses_baseline == self.misses_defense


@dataclass
class OverheadReport:
    workload: str
    cycles_baseline: int
    cycles_defense: int
    instructions: int
    levels: list[LevelOverhead] = field(default_factory=list)

    @property
    def overhead_ratio(self) -> float:
        return self.cycles_defense / self.cycles_baseline if self.cycles_baseline else 1.0

    def level(self, name: str) -> LevelOverhead:
        for lv in self.levels:
            if lv.level == name:
                return lv
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "workload": self.workload,
            "cycles_baseline": self.cycles_baseline,
            "cycles_defense": self.cycles_defense,
            "overhead_ratio": self.overhead_ratio,
            "instructions": self.instructions,
            "levels": [dict(lv.__dict__) for lv in self.levels],
        }


def overhead_from(base: RunResult, dfn: RunResult, workload: str = "trace") -> OverheadReport:
    if base.events != dfn.events or base.instructions != dfn.instructions:
        raise HarnessError("paired runs consumed different traces")
    report = OverheadReport(workload, base.cycles, dfn.cycles, base.instructions)
    for name in base.level_names:
        b, d = base.level_stats[name], dfn.level_stats[name]
        report.levels.append(LevelOverhead(
            level=name,
            mpki_baseline=base.mpki(name),
            mpki_defense=dfn.mpki(name),
            first_access_pki=dfn.first_access_pki(name),
            first_access_fraction=dfn.first_access_fraction(name),
            first_access_share_of_misses=dfn.first_access_share_of_misses(name),
            misses_baseline=b.misses,
            misses_defense=d.misses,
            first_access_misses=d.first_access_misses,
            evictions=d.evictions,
        ))
        if not report.levels[-1].identity_holds:
            raise HarnessError(f"{name}: defense changed the ordinary miss count "
                               f"({b.misses} -> {d.misses}); MPKI identity broken")
    return report


def run_overhead(events: Sequence[AccessEvent], baseline: SimConfig, defense: SimConfig | None = None,
                 workload: str = "trace", parallel: bool = False) -> OverheadReport:
    if defense is None:
        baseline, defense = config_pair(baseline)
    if baseline.replace(defense=True) != defense.replace(defense=True):
        raise HarnessError("paired configs differ in more than the defense flag")
    if baseline.defense or not defense.defense:
        raise HarnessError("expected a defense-off baseline and a defense-on config")
    base, dfn = _paired(events, baseline, defense, parallel)
    return overhead_from(base, dfn, workload)


@dataclass
class SweepPoint:
    llc_size: int
    overhead_ratio: float
    first_access_share_of_misses: float
    llc_misses: int
    llc_first_access_misses: int
    llc_evictions: int
    llc_misses_baseline: int
    mpki_baseline: float
    mpki_defense: float
    first_access_pki: float
    identity_holds: bool


@dataclass
class SweepResult:
    level: str
    points: list[SweepPoint]

    @property
    def llc_sizes(self) -> list[int]:
        return [p.llc_size for p in self.points]

    def to_dict(self) -> dict:
        return {"level": self.level, "points": [dict(p.__dict__) for p in self.points]}


def _sweep_point(events: Sequence[AccessEvent], cfg: SimConfig) -> SweepPoint:
    rep = run_overhead(events, cfg.replace(defense=False), cfg.replace(defense=True))
    lv = rep.level(cfg.levels[-1].name)
    return SweepPoint(cfg.levels[-1].size, rep.overhead_ratio, lv.first_access_share_of_misses,
                      lv.misses_defense, lv.first_access_misses, lv.evictions, lv.misses_baseline,
                      lv.mpki_baseline, lv.mpki_defense, lv.first_access_pki,
                      all(x.identity_holds for x in rep.levels))


def run_sensitivity(events: Sequence[AccessEvent], config: SimConfig, llc_sizes: Sequence[int],
                    workers: int = 1) -> SweepResult:
    """Paired runs of one trace at each LLC size.

    ``workers > 1`` spreads sizes over processes; results do not depend on it.
    """
    sizes = list(llc_sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise HarnessError("LLC sizes must be strictly increasing")
    configs = [config.with_llc_size(s) for s in sizes]  # raises ConfigError on bad geometry
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(configs))) as pool:
            points = list(pool.map(_sweep_point, [events] * len(configs), configs))
    else:
        points = [_sweep_point(events, c) for c in configs]
    return SweepResult(config.levels[-1].name, points)
