import json

from timecache import report
from timecache.config import SimConfig
from timecache.harness import run_attack, run_overhead, run_sensitivity
from timecache.simulator import simulate
from timecache.workload import gen_microbenchmark
from oracles import fuzz_trace, small_config


def test_csv_has_schema_column():
    text = report.stats_csv(simulate(fuzz_trace(1), small_config()))
    header, *rows = text.splitlines()
    assert header.startswith("schema_version,level,")
    assert len(rows) == 3 and all(r.startswith("1,") for r in rows)


def test_json_versioned_and_sorted():
    doc = json.loads(report.stats_json(simulate(fuzz_trace(1), small_config())))
    assert doc["schema_version"] == 1 and doc["kind"] == "simulation"
    assert set(doc["levels"]) == {"L1I", "L1D", "LLC"}


def test_overhead_table_layout():
    rep = run_overhead(fuzz_trace(2, 200), small_config(), workload="fuzz")
    header, row = report.overhead_csv([rep], "LLC").splitlines()
    assert header == ("schema_version,workload,overhead,mpki_LLC_baseline,mpki_LLC_timecache,"
                      "first_access_fraction_LLC")
    assert row.startswith("1,fuzz,")


def test_attack_json_and_text():
    base, dfn = run_attack(gen_microbenchmark(lines=8), SimConfig())
    doc = json.loads(report.attack_json("micro", base, dfn))
    assert doc["baseline"]["hits_observed"] == 8 and doc["timecache"]["hits_observed"] == 0
    assert "hits=8" in report.attack_text(base, dfn)


def test_svgs_deterministic():
    rep = run_overhead(fuzz_trace(3, 100), small_config())
    a, b = report.overhead_svg(rep), report.overhead_svg(rep)
    assert a == b and a.startswith("<svg") and a.count("<rect") == 3
    sw = run_sensitivity(fuzz_trace(3, 100), SimConfig(), [1 << 20, 2 << 20])
    assert "1M" in report.sweep_svg(sw) and "2M" in report.sweep_svg(sw)


def test_human_size():
    assert report.human_size(2 << 20) == "2M"
    assert report.human_size(1536) == "1536"
    assert report.human_size(32 << 10) == "32K"
