import json

import pytest

from timecache.config import (ConfigError, LevelConfig, SimConfig, config_from_dict, load_config,
                              parse_size)


def test_defaults():
    cfg = SimConfig()
    assert [lv.name for lv in cfg.levels] == ["L1I", "L1D", "LLC"]
    assert cfg.memory_latency == 200 and cfg.timestamp_bits == 32 and cfg.defense


@pytest.mark.parametrize("text,value", [("32K", 32768), ("2M", 2 << 20), ("2MB", 2 << 20),
                                        ("1g", 1 << 30), ("4096", 4096), (64, 64)])
def test_parse_size(text, value):
    assert parse_size(text) == value


def test_round_trip_dict(tmp_path):
    cfg = SimConfig(timestamp_bits=8, constant_time_flush=True)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_config(path) == cfg


@pytest.mark.parametrize("data,field", [
    ({"bogus": 1}, "bogus"),
    ({"memory_latency": 0}, "memory_latency"),
    ({"memory_latency": 10}, "memory_latency"),
    ({"defense": "yes"}, "defense"),
    ({"levels": [{"name": "L1", "size": "3K"}]}, "levels.L1"),
    ({"levels": [{"name": "L1", "size": 4096, "colour": 1}]}, "levels[0].colour"),
    ({"levels": [{"name": "A", "size": 4096, "hit_latency": 30},
                 {"name": "B", "size": 65536, "hit_latency": 20}]}, "hit latencies"),
    ({"levels": [{"name": "L2", "size": 65536}, {"name": "L1D", "size": 4096, "role": "data"}]},
     "L1D.role"),
    ({"schema_version": 2}, "schema_version"),
])
def test_field_level_errors(data, field):
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    assert field in str(info.value)


def test_with_llc_size():
    cfg = SimConfig().with_llc_size(8 << 20)
    assert cfg.levels[-1].size == 8 << 20 and cfg.levels[0] == SimConfig().levels[0]
    with pytest.raises(ConfigError):
        SimConfig().with_llc_size(3 << 20)


def test_single_unified_level_is_enough():
    cfg = SimConfig(levels=(LevelConfig("C", 4096),))
    assert cfg.hierarchy().path("I") == [0]
