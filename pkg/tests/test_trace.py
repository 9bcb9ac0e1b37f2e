import pytest
from hypothesis import given, settings, strategies as st

from timecache.trace import AccessEvent, TraceError, parse_trace, serialize, validate
from timecache.workload import gen_fuzz


def test_minimal_trace():
    events = parse_trace("1 1 0 SCHED\n2 1 0 R 0x1000")
    assert events == [AccessEvent(1, 1, 0, "SCHED"), AccessEvent(2, 1, 0, "R", 0x1000)]


def test_comments_and_blank_lines():
    assert len(parse_trace("# hi\n\n1 1 0 SCHED\n   \n2 1 0 probe 1000\n")) == 2


@pytest.mark.parametrize("text,needle", [
    ("1 1 0 R 0x1000", "access before schedule"),
    ("1 1 0 SCHED\n1 1 0 R 0x10", "non-monotonic"),
    ("1 1 0 SCHED\n2 1 0 JUMP 0x10", "unknown op"),
    ("1 1 0 SCHED\n2 1 0 R", "requires exactly one address"),
    ("1 1 0 SCHED 0x10", "SCHED takes no address"),
    ("1 x 0 SCHED", "non-integer"),
    ("1 1 0 SCHED\n2 1 0 R 0xg", "bad hex"),
    ("1 1 0 SCHED\n2 1 1 SCHED", "already running"),
    ("1 1 0 SCHED\n2 2 0 R 0x40", "not scheduled"),
    ("1 1", "expected"),
])
def test_errors(text, needle):
    with pytest.raises(TraceError) as info:
        parse_trace(text)
    assert needle in str(info.value)
    assert str(info.value).startswith(f"line {text.count(chr(10)) + 1}")


def test_error_cites_fixture_line(datadir):
    with pytest.raises(TraceError) as info:
        parse_trace((datadir / "bad_line7.trace").read_text())
    assert info.value.line == 7 and info.value.column == 9


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32), length=st.integers(1, 200), nprocs=st.integers(1, 4),
       ncontexts=st.integers(1, 3))
def test_round_trip(seed, length, nprocs, ncontexts):
    events = gen_fuzz(seed, length=length, nprocs=nprocs, ncontexts=ncontexts)
    validate(events)
    assert parse_trace(serialize(events)) == events


def test_validate_rejects():
    with pytest.raises(TraceError):
        validate([AccessEvent(1, 1, 0, "R", 0)])
