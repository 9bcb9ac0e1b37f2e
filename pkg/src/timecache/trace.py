"""Text trace format.

One event per line::

    <seq> <pid> <ctx> <op> [<hex-addr>]

``op`` is one of R, W, I (instruction fetch), F (flush), PROBE (timed read)
or SCHED (schedule ``pid`` on hardware context ``ctx``; takes no address).
Blank lines and lines starting with ``#`` are ignored. ``seq`` must strictly
increase, and every non-SCHED event must come after a SCHED that put its pid
on its context.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

OPS = ("R", "W", "I", "F", "PROBE", "SCHED")
ACCESS_OPS = frozenset({"R", "W", "I", "PROBE"})


class TraceError(ValueError):
    def __init__(self, line: int, message: str, column: int | None = None):
        self.line = line
        self.column = column
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")
        self.message = message


@dataclass(frozen=True)
class AccessEvent:
    seq: int
    pid: int
    ctx: int
    op: str
    addr: int | None = None

    def __str__(self) -> str:
        if self.op == "SCHED":
            return f"{self.seq} {self.pid} {self.ctx} SCHED"
        return f"{self.seq} {self.pid} {self.ctx} {self.op} {self.addr:#x}"


def _column_of(raw: str, index: int) -> int:
    # 1-based column of the index-th whitespace-separated field
    pos = 0
    for i, tok in enumerate(raw.split()):
        pos = raw.index(tok, pos)
        if i == index:
            return pos + 1
        pos += len(tok)
    return len(raw) + 1


class ScheduleTracker:
    """Checks that accesses come from the pid currently on their context."""

    def __init__(self) -> None:
        self.running: dict[int, int] = {}

    def check(self, ev: AccessEvent) -> str | None:
        if ev.op == "SCHED":
            for ctx, pid in self.running.items():
                if pid == ev.pid and ctx != ev.ctx:
                    return f"pid {ev.pid} already running on context {ctx}"
            self.running[ev.ctx] = ev.pid
            return None
        current = self.running.get(ev.ctx)
        if current is None:
            return "access before schedule"
        if current != ev.pid:
            return f"pid {ev.pid} is not scheduled on context {ev.ctx} (pid {current} is)"
        return None


def parse_trace(text: str) -> list[AccessEvent]:
    events: list[AccessEvent] = []
    tracker = ScheduleTracker()
    last_seq = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) < 4:
            raise TraceError(lineno, f"expected 'seq pid ctx op [addr]', got {len(fields)} fields")
        try:
            seq, pid, ctx = (int(f, 10) for f in fields[:3])
        except ValueError:
            bad = next(i for i, f in enumerate(fields[:3]) if not f.lstrip("-").isdigit())
            raise TraceError(lineno, f"non-integer field {fields[bad]!r}", _column_of(raw, bad)) from None
        if min(seq, pid, ctx) < 0:
            raise TraceError(lineno, "seq, pid and ctx must be non-negative")
        op = fields[3].upper()
        if op not in OPS:
            raise TraceError(lineno, f"unknown op {fields[3]!r}", _column_of(raw, 3))
        if op == "SCHED":
            if len(fields) != 4:
                raise TraceError(lineno, "SCHED takes no address", _column_of(raw, 4))
            addr = None
        else:
            if len(fields) != 5:
                raise TraceError(lineno, f"{op} requires exactly one address")
            try:
                addr = int(fields[4], 16)
            except ValueError:
                raise TraceError(lineno, f"bad hex address {fields[4]!r}", _column_of(raw, 4)) from None
            if not 0 <= addr < (1 << 64):
                raise TraceError(lineno, "address out of 64-bit range", _column_of(raw, 4))
        if last_seq is not None and seq <= last_seq:
            raise TraceError(lineno, f"non-monotonic seq {seq} after {last_seq}", _column_of(raw, 0))
        last_seq = seq
        ev = AccessEvent(seq, pid, ctx, op, addr)
        problem = tracker.check(ev)
        if problem:
            raise TraceError(lineno, problem)
        events.append(ev)
    return events


def validate(events: Iterable[AccessEvent]) -> None:
    """Same checks as :func:`parse_trace` for in-process event lists."""
    tracker = ScheduleTracker()
    last_seq = None
    for i, ev in enumerate(events, start=1):
        if last_seq is not None and ev.seq <= last_seq:
            raise TraceError(i, f"non-monotonic seq {ev.seq} after {last_seq}")
        last_seq = ev.seq
        problem = tracker.check(ev)
        if problem:
            raise TraceError(i, problem)


def serialize(events: Iterable[AccessEvent]) -> str:
    return "".join(f"{ev}\n" for ev in events)

