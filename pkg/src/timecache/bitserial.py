"""Behavioral model of the transposed timestamp/s-bit SRAM array.

Each cache line owns one column holding its load-time timestamp (``tc``) and
one s-bit per hardware context. The model exposes the two access paths of a
transpose SRAM: column access (the transpose interface, used on ordinary
cache operations) and row access (the bit-line interface, used for s-bit
save/restore and the bit-serial timestamp comparison). Storage is kept in
column-major buffers with zero-copy numpy row views, so per-line updates are
cheap and whole-row operations are vectorized; both paths observe the same
bits.
"""

from __future__ import annotations

from array import array

import numpy as np


class ArrayIndexError(IndexError):
    pass


class TransposeArray:
    def __init__(self, num_columns: int, timestamp_bits: int = 32, num_contexts: int = 1):
        if num_columns <= 0:
            raise ValueError("num_columns must be positive")
        if not 1 <= timestamp_bits <= 64:
            raise ValueError("timestamp_bits must be in [1, 64]")
        if num_contexts <= 0:
            raise ValueError("num_contexts must be positive")
        self.num_columns = num_columns
        self.timestamp_bits = timestamp_bits
        self.num_contexts = num_contexts
        self.tc_mask = (1 << timestamp_bits) - 1
        self._tc = array("Q", bytes(8 * num_columns))
        self.tc = np.frombuffer(self._tc, dtype=np.uint64)
        self._s = [bytearray(num_columns) for _ in range(num_contexts)]
        self.sbits = [np.frombuffer(buf, dtype=bool) for buf in self._s]
        self.last_iterations = 0

    @property
    def bit_rows(self) -> int:
        return self.timestamp_bits + self.num_contexts

    def _check_column(self, column: int) -> None:
        if not 0 <= column < self.num_columns:
            raise ArrayIndexError(f"column {column} out of range [0, {self.num_columns})")

    def _check_ctx(self, ctx: int) -> None:
        if not 0 <= ctx < self.num_contexts:
            raise ArrayIndexError(f"context {ctx} out of range [0, {self.num_contexts})")

    # -- transpose (column) interface -------------------------------------

    def write_tc(self, column: int, tc: int) -> None:
        self._tc[column] = tc & self.tc_mask

    def read_tc(self, column: int) -> int:
        self._check_column(column)
        return self._tc[column]

    def read_sbit(self, column: int, ctx: int) -> bool:
        return bool(self._s[ctx][column])

    def write_sbit(self, column: int, ctx: int, value: bool) -> None:
        self._s[ctx][column] = 1 if value else 0

    def set_sbits_onehot(self, column: int, ctx: int) -> None:
        """Fill semantics: the loading context's s-bit set, all others reset."""
        for c, buf in enumerate(self._s):
            buf[column] = c == ctx

    def clear_sbits(self, column: int) -> None:
        for buf in self._s:
            buf[column] = 0

    def read_sbits(self, column: int) -> tuple[bool, ...]:
        self._check_column(column)
        return tuple(bool(buf[column]) for buf in self._s)

    def checked_write_tc(self, column: int, tc: int) -> None:
        self._check_column(column)
        self.write_tc(column, tc)

    def checked_write_sbit(self, column: int, ctx: int, value: bool) -> None:
        self._check_column(column)
        self._check_ctx(ctx)
        self.write_sbit(column, ctx, value)

    def checked_read_sbit(self, column: int, ctx: int) -> bool:
        self._check_column(column)
        self._check_ctx(ctx)
        return self.read_sbit(column, ctx)

    # -- bit-line (row) interface -----------------------------------------

    def read_row(self, row: int) -> np.ndarray:
        """Row 0 is the timestamp MSB; rows past the timestamp are s-bit rows."""
        if not 0 <= row < self.bit_rows:
            raise ArrayIndexError(f"row {row} out of range [0, {self.bit_rows})")
        if row < self.timestamp_bits:
            shift = np.uint64(self.timestamp_bits - 1 - row)
            return ((self.tc >> shift) & np.uint64(1)).astype(bool)
        return self.sbits[row - self.timestamp_bits].copy()

    def save_row(self, ctx: int) -> np.ndarray:
        self._check_ctx(ctx)
        return self.sbits[ctx].copy()

    def restore_row(self, ctx: int, sbits: np.ndarray) -> None:
        self._check_ctx(ctx)
        sbits = np.asarray(sbits, dtype=bool)
        if sbits.shape != (self.num_columns,):
            raise ArrayIndexError(
                f"s-bit row has shape {sbits.shape}, expected ({self.num_columns},)"
            )
        self.sbits[ctx][:] = sbits

    def clear_row(self, ctx: int) -> None:
        self._check_ctx(ctx)
        self.sbits[ctx][:] = False

    def compare_and_reset(self, ts: int, ctx: int) -> np.ndarray:
        """Reset ``ctx``'s s-bit on every column whose timestamp exceeds ``ts``.

        MSB-first bit-serial comparison across all columns at once. Each
        column has two latches: ``gt`` (Tc > Ts decided) and ``lt`` (Tc < Ts
        decided; the column ignores the remaining bits). Ts is consumed from
        a shift register one bit per iteration, and the loop always runs
        ``timestamp_bits`` iterations. Returns the reset mask.
        """
        self._check_ctx(ctx)
        if not 0 <= ts <= self.tc_mask:
            raise ValueError(f"ts {ts} does not fit in {self.timestamp_bits} bits")
        gt = np.zeros(self.num_columns, dtype=bool)
        lt = np.zeros(self.num_columns, dtype=bool)
        shift_register = ts
        msb = 1 << (self.timestamp_bits - 1)
        iterations = 0
        for i in range(self.timestamp_bits):
            ts_bit = bool(shift_register & msb)
            shift_register = (shift_register << 1) & self.tc_mask
            tc_bits = self.read_row(i)
            undecided = ~(gt | lt)
            gt |= undecided & tc_bits & (not ts_bit)
            lt |= undecided & ~tc_bits & ts_bit
            iterations += 1
        self.last_iterations = iterations
        self.sbits[ctx] &= ~gt
        return gt

    def dump(self) -> str:
        """Both orientations as text: one line per row, then one per column."""
        lines = ["rows (bit-line view):"]
        for r in range(self.bit_rows):
            if r < self.timestamp_bits:
                label = f"tc[{self.timestamp_bits - 1 - r}]"
            else:
                label = f"s[{r - self.timestamp_bits}]"
            lines.append(f"  {label:>8} " + "".join("1" if b else "0" for b in self.read_row(r)))
        lines.append("columns (transpose view):")
        for c in range(self.num_columns):
            sbits = "".join("1" if b else "0" for b in self.read_sbits(c))
            lines.append(f"  {c:>6} tc={self.read_tc(c):#x} s={sbits}")
        return "\n".join(lines)
