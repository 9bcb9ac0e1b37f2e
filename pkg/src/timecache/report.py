"""CSV, JSON and SVG report writers.

Every CSV starts with a ``schema_version`` column and every JSON document
carries a ``schema_version`` field. Output is byte-stable for identical
inputs: keys are sorted and floats are written with ``repr``.
"""

from __future__ import annotations

import csv
import io
import json
from html import escape
from typing import Sequence

from .harness import LeakageReport, OverheadReport, SweepResult
from .simulator import RunResult

SCHEMA_VERSION = 1


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schema_version", *header])
    for row in rows:
        w.writerow([SCHEMA_VERSION, *row])
    return buf.getvalue()


def to_json(payload: dict) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **payload}, indent=2, sort_keys=True) + "\n"


STATS_HEADER = ("level", "instructions", "cycles", "hits", "misses", "first_access_misses", "fills",
                "evictions", "writebacks", "invalidations", "mpki", "first_access_fraction")


def stats_csv(result: RunResult) -> str:
    rows = []
    for name in result.level_names:
        st = result.level_stats[name]
        rows.append((name, result.instructions, result.cycles, st.hits, st.misses,
                     st.first_access_misses, st.fills, st.evictions, st.writebacks,
                     st.invalidations, repr(result.mpki(name)), repr(result.first_access_fraction(name))))
    return _csv(STATS_HEADER, rows)


def stats_json(result: RunResult) -> str:
    return to_json({
        "kind": "simulation",
        "config": result.config.to_dict(),
        "instructions": result.instructions,
        "cycles": result.cycles,
        "events": result.events,
        "flushes": result.flushes,
        "switches": result.switches,
        "switch_cycles": result.switch_cycles,
        "rollover_resets": result.rollover_resets,
        "probes": [p.__dict__ for p in result.probes],
        "levels": {
            name: {**result.level_stats[name].as_dict(), "mpki": result.mpki(name),
                   "first_access_fraction": result.first_access_fraction(name)}
            for name in result.level_names
        },
    })


def overhead_csv(reports: Sequence[OverheadReport], level: str) -> str:
    """One row per workload in the layout of an overhead/MPKI table."""
    rows = []
    for rep in reports:
        lv = rep.level(level)
        rows.append((rep.workload, repr(rep.overhead_ratio), repr(lv.mpki_baseline), repr(lv.mpki_defense),
                     repr(lv.first_access_fraction)))
    return _csv(("workload", "overhead", f"mpki_{level}_baseline", f"mpki_{level}_timecache",
                 f"first_access_fraction_{level}"), rows)


def overhead_json(report: OverheadReport) -> str:
    return to_json({"kind": "overhead", **report.to_dict()})


def sweep_csv(result: SweepResult) -> str:
    rows = [(p.llc_size, repr(p.overhead_ratio), repr(p.first_access_share_of_misses), p.llc_misses,
             p.llc_first_access_misses, p.llc_evictions, repr(p.mpki_baseline), repr(p.mpki_defense))
            for p in result.points]
    return _csv(("llc_size", "overhead_ratio", "first_access_share_of_misses", "misses",
                 "first_access_misses", "evictions", "mpki_baseline", "mpki_timecache"), rows)


def sweep_json(result: SweepResult) -> str:
    return to_json({"kind": "sweep", **result.to_dict()})


def attack_json(scenario: str, baseline: LeakageReport, defense: LeakageReport, **extra) -> str:
    return to_json({"kind": "attack", "scenario": scenario, "baseline": baseline.to_dict(),
                    "timecache": defense.to_dict(), **extra})


def attack_text(baseline: LeakageReport | None, defense: LeakageReport) -> str:
    lines = []
    for rep in (baseline, defense):
        if rep is None:
            continue
        lines.append(f"{rep.label:>9}: probes={len(rep.latencies)} hits={rep.hits_observed} "
                     f"accuracy={rep.accuracy:.4f} threshold={rep.hit_threshold_cycles:g}")
    return "\n".join(lines) + "\n"


def bar_chart_svg(title: str, labels: Sequence[str], values: Sequence[float], *,
                  width: int = 480, height: int = 280, fmt: str = "{:.3f}") -> str:
    """Minimal static bar chart."""
    margin_l, margin_b, margin_t = 50, 40, 30
    plot_w, plot_h = width - margin_l - 10, height - margin_b - margin_t
    top = max(values, default=1.0) or 1.0
    n = max(len(values), 1)
    slot = plot_w / n
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{margin_l}" y1="{margin_t + plot_h}" x2="{width - 10}" y2="{margin_t + plot_h}" stroke="black"/>',
        f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" y2="{margin_t + plot_h}" stroke="black"/>',
    ]
    for i, (label, value) in enumerate(zip(labels, values)):
        h = plot_h * value / top
        x = margin_l + i * slot + slot * 0.15
        y = margin_t + plot_h - h
        parts.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{slot * 0.7:.1f}" height="{h:.1f}" fill="#4878a8"/>')
        parts.append(f'<text x="{x + slot * 0.35:.1f}" y="{y - 3:.1f}" text-anchor="middle">'
                     f'{escape(fmt.format(value))}</text>')
        parts.append(f'<text x="{x + slot * 0.35:.1f}" y="{margin_t + plot_h + 15:.1f}" '
                     f'text-anchor="middle">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def human_size(n: int) -> str:
    for unit, shift in (("G", 30), ("M", 20), ("K", 10)):
        if n >= 1 << shift and n % (1 << shift) == 0:
            return f"{n >> shift}{unit}"
    return str(n)


def sweep_svg(result: SweepResult) -> str:
    return bar_chart_svg("First-access share of LLC misses",
                         [human_size(p.llc_size) for p in result.points],
                         [p.first_access_share_of_misses for p in result.points])


def overhead_svg(report: OverheadReport) -> str:
    return bar_chart_svg(f"First accesses / total accesses ({report.workload})",
                         [lv.level for lv in report.levels],
                         [lv.first_access_fraction for lv in report.levels], fmt="{:.4f}")
