"""Functional model of the RX9T bit-cell array.

Every operation drives the array's control lines with one of the bit-cell
operation patterns (write, row read, column read, hold, multiply/search,
multi-row Boolean), checks the pattern, settles the precharged lines
(a line discharges iff it has at least one enabled path to ground) and
senses them.  Voltages are two-level logic plus a ``DISCHARGED`` state.

Per-cell discharge rules used throughout::

    read bitline RBL   discharges through a cell on an active RWL storing 1
    read bitline RBLB  discharges through a cell on an active RWL storing 0
    match line ML      discharges through a cell storing 1 whose SL is low,
                       or a cell storing 0 whose SLB is low

Row/column bit order: index 0 is the leftmost character of a text image.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ArrayError",
    "IndexOutOfRange",
    "LengthMismatch",
    "SameRow",
    "InvalidTernaryEncoding",
    "InvalidTernaryEncodingWarning",
    "InvalidControlPattern",
    "Mode",
    "LineState",
    "ControlVector",
    "CellArray",
    "TCAM_X",
    "ml_discharge",
    "sense_xnor",
    "encode_ternary",
]


class ArrayError(Exception):
    pass


class IndexOutOfRange(ArrayError, IndexError):
    pass


class LengthMismatch(ArrayError, ValueError):
    pass


class SameRow(ArrayError, ValueError):
    pass


class InvalidTernaryEncoding(ArrayError, ValueError):
    pass


class InvalidTernaryEncodingWarning(UserWarning):
    pass


class InvalidControlPattern(ArrayError, ValueError):
    pass


class Mode(enum.Enum):
    IDLE = "idle"
    WRITE = "write"
    READ_ROW = "read_row"
    READ_COLUMN = "read_column"
    BCAM = "bcam"
    TCAM = "tcam"
    PIM_MULTIPLY = "pim_multiply"
    PIM_BOOLEAN = "pim_boolean"


class LineState(enum.IntEnum):
    DISCHARGED = -1
    LOW = 0
    HIGH = 1


NC = None  # line not driven
_HIGH, _DISCHARGED = int(LineState.HIGH), int(LineState.DISCHARGED)


@dataclass(frozen=True)
class ControlVector:
    """Logic levels on one cell's control lines; ``None`` means not connected."""

    wwl: int | None = NC
    wbl: int | None = NC
    wblb: int | None = NC
    sl_rbl: int | None = NC
    rblb_slb: int | None = NC
    rwl: int | None = NC
    ml_hbl: int | None = NC

    def matching_modes(self):
        return _matching_modes(self)

    def check(self, mode):
        """Raise :class:`InvalidControlPattern` unless the vector is a valid ``mode`` pattern."""
        if mode not in _matching_modes(self):
            raise InvalidControlPattern(f"{self} is not a valid {mode.value} control pattern")
        return self


def _search_lines(sl, slb):
    # differential search, or a line pair held high to mask the cell
    return (sl, slb) in ((1, 0), (0, 1), (1, 1))


# One predicate per operation.  READ_ROW and PIM_BOOLEAN share a pattern;
# they differ only in how many read wordlines are raised.
_PATTERNS = {
    Mode.WRITE: lambda v: v.wwl == 1 and v.wbl in (0, 1) and v.wblb == 1 - v.wbl and v.sl_rbl is NC
    and v.rblb_slb is NC and v.rwl == 0 and v.ml_hbl is NC,
    Mode.READ_ROW: lambda v: v.wwl == 0 and v.wbl is NC and v.wblb is NC and v.sl_rbl == 1
    and v.rblb_slb == 1 and v.rwl == 1 and v.ml_hbl == 0,
    Mode.READ_COLUMN: lambda v: v.wwl == 0 and v.wbl is NC and v.wblb is NC and v.sl_rbl == 1
    and v.rblb_slb == 0 and v.rwl == 0 and v.ml_hbl == 1,
    Mode.IDLE: lambda v: v.wwl == 0 and v.wbl is NC and v.wblb is NC and v.sl_rbl is NC
    and v.rblb_slb is NC and v.rwl == 0 and v.ml_hbl == 1,
    Mode.PIM_MULTIPLY: lambda v: v.wwl == 0 and v.wbl is NC and v.wblb is NC
    and (v.sl_rbl, v.rblb_slb) in ((1, 0), (0, 1)) and v.rwl == 0 and v.ml_hbl == 1,
    Mode.BCAM: lambda v: v.wwl == 0 and v.wbl is NC and v.wblb is NC
    and _search_lines(v.sl_rbl, v.rblb_slb) and v.rwl == 0 and v.ml_hbl == 1,
    Mode.TCAM: lambda v: v.wwl == 0 and v.wbl is NC and v.wblb is NC
    and _search_lines(v.sl_rbl, v.rblb_slb) and v.rwl == 0 and v.ml_hbl == 1,
    Mode.PIM_BOOLEAN: lambda v: v.wwl == 0 and v.wbl is NC and v.wblb is NC and v.sl_rbl == 1
    and v.rblb_slb == 1 and v.rwl == 1 and v.ml_hbl == 0,
}


@functools.lru_cache(maxsize=None)
def _matching_modes(vector):
    return frozenset(m for m, ok in _PATTERNS.items() if ok(vector))


def _drive(mode, **lines):
    return _checked(mode, tuple(sorted(lines.items())))


@functools.lru_cache(maxsize=None)
def _checked(mode, items):
    return ControlVector(**dict(items)).check(mode)


# ---------------------------------------------------------------------------
# line physics (vectorised, shared with the MAC engine)


def ml_discharge(stored, sl, slb):
    """1 where a match-line path to ground exists through the cell."""
    stored = np.asarray(stored, dtype=np.uint8)
    return (stored & (1 - np.asarray(sl, dtype=np.uint8))) | ((1 - stored) & (1 - np.asarray(slb, dtype=np.uint8)))


def sense_xnor(stored, operand):
    """Per-cell multiply: ML segment precharged, SL=operand, SLB=~operand.

    The segment stays high (sensed 1) iff the stored bit equals the operand.
    """
    operand = np.asarray(operand, dtype=np.uint8)
    return (1 - ml_discharge(stored, operand, 1 - operand)).astype(np.uint8)


def _settle(n, paths):
    """Precharge ``n`` lines high and apply discharge paths one event at a time."""
    # a discharged line stays discharged, so the events commute
    hit = np.zeros(n, dtype=bool)
    for p in paths:
        hit |= np.asarray(p, dtype=bool)
    return np.where(hit, np.int8(_DISCHARGED), np.int8(_HIGH))


TCAM_X = "X"
_TERNARY = {0: 0, 1: 1, "0": 0, "1": 1, "X": 2, "x": 2, None: 2, 2: 2}


def encode_ternary(symbols):
    """Ternary symbols -> stored cell pairs: 0 -> (0,0), 1 -> (1,1), X -> (0,1)."""
    out = []
    for s in symbols:
        t = _ternary(s)
        out.extend({0: (0, 0), 1: (1, 1), 2: (0, 1)}[t])
    return np.array(out, dtype=np.uint8)


def _ternary(s):
    try:
        return _TERNARY[s]
    except (KeyError, TypeError):
        raise ValueError(f"ternary symbol must be 0, 1 or X, got {s!r}") from None


@dataclass
class TraceRecord:
    step: int
    mode: str
    inputs: str
    outputs: str


def _bitstr(bits):
    digits = (np.asarray(bits).ravel() != 0).astype(np.uint8) + ord("0")
    return digits.tobytes().decode()


class CellArray:
    """``rows x cols`` array of bit-cells (default 64 x 64, 4 Kb).

    Only :meth:`write_row` (and the bulk loaders) change storage; every other
    operation is a non-destructive sense.  ``stats`` tallies operations for
    the performance model.
    """

    def __init__(self, rows=64, cols=64, trace=False):
        for name, n in (("rows", rows), ("cols", cols)):
            if not isinstance(n, (int, np.integer)) or n < 1 or n & (n - 1):
                raise ValueError(f"{name} must be a positive power of two, got {n!r}")
        self._rows = int(rows)
        self._cols = int(cols)
        self._storage = np.zeros((self._rows, self._cols), dtype=np.uint8)
        self.mode = Mode.IDLE
        self.last_lines: dict[str, np.ndarray] = {}
        self.diagnostics: list[str] = []
        self.trace_enabled = trace
        self.trace: list[TraceRecord] = []
        self.stats = dict.fromkeys(
            ("writes", "row_reads", "column_reads", "cam_searches", "cam_search_bits",
             "pim_multiplies", "pim_bit_ops", "boolean_ops"), 0)

    @property
    def rows(self):
        return self._rows

    @property
    def cols(self):
        return self._cols

    @property
    def shape(self):
        return (self._rows, self._cols)

    @property
    def storage(self):
        """Read-only view of the stored bits."""
        view = self._storage.view()
        view.setflags(write=False)
        return view

    def copy(self):
        other = CellArray(self._rows, self._cols)
        other._storage[:] = self._storage
        return other

    # -- helpers -----------------------------------------------------------

    def _row_index(self, row):
        if not isinstance(row, (int, np.integer)) or not 0 <= row < self._rows:
            raise IndexOutOfRange(f"row {row!r} outside 0..{self._rows - 1}")
        return int(row)

    def _col_index(self, col):
        if not isinstance(col, (int, np.integer)) or not 0 <= col < self._cols:
            raise IndexOutOfRange(f"column {col!r} outside 0..{self._cols - 1}")
        return int(col)

    def _bits(self, bits, n, what):
        arr = np.asarray(bits)
        if arr.ndim != 1 or arr.shape[0] != n:
            raise LengthMismatch(f"{what} must hold {n} bits, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.all((arr == 0) | (arr == 1)):
                raise ValueError(f"{what} must contain only 0/1")
            arr = arr.astype(np.uint8)
        elif arr.max(initial=0) > 1:
            raise ValueError(f"{what} must contain only 0/1")
        return arr

    def _record(self, mode, inputs, outputs):
        self.trace.append(TraceRecord(len(self.trace), mode.value, inputs, outputs))

    def _finish(self):
        self.mode = Mode.IDLE

    # -- normal memory mode ------------------------------------------------

    def write_row(self, row, bits):
        r = self._row_index(row)
        data = self._bits(bits, self._cols, "row data")
        self.mode = Mode.WRITE
        for d in (0, 1):
            if np.any(data == d):
                _drive(Mode.WRITE, wwl=1, wbl=d, wblb=1 - d, rwl=0)
        self._storage[r] = data
        self.stats["writes"] += 1
        if self.trace_enabled:
            self._record(Mode.WRITE, f"row={r} bits={_bitstr(data)}", "")
        self._finish()
        return self

    def load(self, matrix):
        """Write every row of ``matrix``; same effect and tallies as one write_row per row."""
        m = np.asarray(matrix)
        if m.shape != self.shape:
            raise LengthMismatch(f"image must be {self.shape}, got {m.shape}")
        if not np.all((m == 0) | (m == 1)):
            raise ValueError("image must contain only 0/1")
        m = m.astype(np.uint8)
        self.mode = Mode.WRITE
        for d in (0, 1):
            if np.any(m == d):
                _drive(Mode.WRITE, wwl=1, wbl=d, wblb=1 - d, rwl=0)
        self._storage[:] = m
        self.stats["writes"] += self._rows
        if self.trace_enabled:
            for r in range(self._rows):
                self._record(Mode.WRITE, f"row={r} bits={_bitstr(m[r])}", "")
        self._finish()
        return self

    def read_row(self, row):
        r = self._row_index(row)
        self.mode = Mode.READ_ROW
        _drive(Mode.READ_ROW, wwl=0, sl_rbl=1, rblb_slb=1, rwl=1, ml_hbl=0)
        stored = self._storage[r]
        rbl = _settle(self._cols, [stored == 1])
        rblb = _settle(self._cols, [stored == 0])
        self.last_lines = {"RBL": rbl, "RBLB": rblb}
        # differential SA: 1 when RBL fell below RBLB
        out = ((rbl == _DISCHARGED) & (rblb == _HIGH)).astype(np.uint8)
        self.stats["row_reads"] += 1
        if self.trace_enabled:
            self._record(Mode.READ_ROW, f"row={r}", _bitstr(out))
        self._finish()
        return out

    def read_column(self, col):
        c = self._col_index(col)
        self.mode = Mode.READ_COLUMN
        _drive(Mode.READ_COLUMN, wwl=0, sl_rbl=1, rblb_slb=0, rwl=0, ml_hbl=1)
        ml = _settle(self._rows, [ml_discharge(self._storage[:, c], 1, 0)])
        self.last_lines = {"ML": ml}
        out = (ml == _HIGH).astype(np.uint8)
        self.stats["column_reads"] += 1
        if self.trace_enabled:
            self._record(Mode.READ_COLUMN, f"col={c}", _bitstr(out))
        self._finish()
        return out

    def transpose_read(self):
        return np.stack([self.read_column(c) for c in range(self._cols)])

    # -- CAM mode ------------------------------------------------------------

    def _search_rows(self, rows):
        if rows is None:
            return np.arange(self._rows)
        idx = np.arange(self._rows)[rows] if isinstance(rows, slice) else np.asarray(rows, dtype=np.int64)
        for r in idx:
            self._row_index(int(r))
        return idx

    def bcam_search(self, key, rows=None, columns=None):
        """Binary search of ``key`` against every row (or the ``rows`` subset).

        With ``columns`` the key covers only those columns; the rest have
        SL and SLB held high so they cannot discharge the match line.
        Returns one match bit per searched row.
        """
        col_idx = np.arange(self._cols) if columns is None else np.arange(self._cols)[columns]
        k = self._bits(key, len(col_idx), "search key")
        row_idx = self._search_rows(rows)
        self.mode = Mode.BCAM
        for s in (0, 1):
            if np.any(k == s):
                _drive(Mode.BCAM, wwl=0, sl_rbl=s, rblb_slb=1 - s, rwl=0, ml_hbl=1)
        if len(col_idx) < self._cols:
            _drive(Mode.BCAM, wwl=0, sl_rbl=1, rblb_slb=1, rwl=0, ml_hbl=1)
        if rows is None and columns is None:
            cells = self._storage
        else:
            cells = self._storage[np.ix_(row_idx, col_idx)]
        paths = ml_discharge(cells, k, 1 - k)
        ml = _settle(len(row_idx), [paths.any(axis=1)])
        self.last_lines = {"ML": ml}
        out = (ml == _HIGH).astype(np.uint8)
        self.stats["cam_searches"] += 1
        self.stats["cam_search_bits"] += len(row_idx) * len(col_idx)
        if self.trace_enabled:
            self._record(Mode.BCAM, f"key={_bitstr(k)}", _bitstr(out))
        self._finish()
        return out

    def tcam_search(self, key, rows=None, strict=False):
        """Ternary search: each key symbol covers a pair of adjacent cells.

        Stored pairs: (0,0)=0, (1,1)=1, (0,1)=X.  The search bit drives SL of
        the first cell and SLB of the second; the other line of each cell is
        held high.  A key symbol X holds all four lines high.  Rows holding
        the invalid pair (1,0) always report a mismatch; ``strict`` turns the
        diagnostic warning into :class:`InvalidTernaryEncoding`.
        """
        if self._cols % 2:
            raise LengthMismatch("TCAM needs an even column count")
        width = self._cols // 2
        if len(key) != width:
            raise LengthMismatch(f"ternary key must hold {width} symbols, got {len(key)}")
        sym = np.array([_ternary(s) for s in key], dtype=np.uint8)
        row_idx = self._search_rows(rows)
        self.mode = Mode.TCAM
        sl = np.ones(self._cols, dtype=np.uint8)
        slb = np.ones(self._cols, dtype=np.uint8)
        care = sym != 2
        sl[0::2] = np.where(care, sym, 1)
        slb[1::2] = np.where(care, 1 - sym, 1)
        for pair in set(zip(sl.tolist(), slb.tolist())):
            _drive(Mode.TCAM, wwl=0, sl_rbl=pair[0], rblb_slb=pair[1], rwl=0, ml_hbl=1)
        cells = self._storage if rows is None else self._storage[row_idx]
        paths = ml_discharge(cells, sl, slb)
        invalid = ((cells[:, 0::2] == 1) & (cells[:, 1::2] == 0)).any(axis=1)
        # an invalid pair discharges regardless of the search condition
        ml = _settle(len(row_idx), [paths.any(axis=1), invalid])
        self.last_lines = {"ML": ml}
        out = (ml == _HIGH).astype(np.uint8)
        self.stats["cam_searches"] += 1
        self.stats["cam_search_bits"] += len(row_idx) * self._cols
        if invalid.any():
            bad = [int(r) for r in row_idx[invalid]]
            msg = f"invalid ternary pair (1,0) stored in rows {bad}; reported as mismatch"
            self.diagnostics.append(msg)
            if strict:
                self._finish()
                raise InvalidTernaryEncoding(msg)
            warnings.warn(msg, InvalidTernaryEncodingWarning, stacklevel=2)
        if self.trace_enabled:
            self._record(Mode.TCAM, "key=" + "".join("01X"[s] for s in sym), _bitstr(out))
        self._finish()
        return out

    # -- PIM mode ------------------------------------------------------------

    def pim_boolean(self, row_a, row_b):
        """Activate two rows at once and sense both read bitlines per column."""
        a, b = self._row_index(row_a), self._row_index(row_b)
        if a == b:
            raise SameRow("PIM Boolean needs two distinct rows")
        self.mode = Mode.PIM_BOOLEAN
        _drive(Mode.PIM_BOOLEAN, wwl=0, sl_rbl=1, rblb_slb=1, rwl=1, ml_hbl=0)
        # unselected rows keep RWL grounded, so only rows a and b have paths
        sa, sb = self._storage[a], self._storage[b]
        rbl = _settle(self._cols, [sa == 1, sb == 1])
        rblb = _settle(self._cols, [sa == 0, sb == 0])
        self.last_lines = {"RBL": rbl, "RBLB": rblb}
        nor = (rbl == _HIGH).astype(np.uint8)
        and_ = (rblb == _HIGH).astype(np.uint8)
        out = {"and": and_, "nor": nor, "xnor": nor | and_}
        self.stats["boolean_ops"] += 1
        self.stats["pim_bit_ops"] += self._cols
        if self.trace_enabled:
            self._record(Mode.PIM_BOOLEAN, f"rows={a},{b}",
                         f"and={_bitstr(and_)} nor={_bitstr(nor)} xnor={_bitstr(out['xnor'])}")
        self._finish()
        return out

    def pim_multiply_row(self, row, operand):
        """Bitwise XNOR of a stored row with an operand on the search lines."""
        r = self._row_index(row)
        op = self._bits(operand, self._cols, "operand")
        self.mode = Mode.PIM_MULTIPLY
        for s in (0, 1):
            if np.any(op == s):
                _drive(Mode.PIM_MULTIPLY, wwl=0, sl_rbl=s, rblb_slb=1 - s, rwl=0, ml_hbl=1)
        ml = _settle(self._cols, [ml_discharge(self._storage[r], op, 1 - op)])
        self.last_lines = {"ML": ml}
        out = (ml == _HIGH).astype(np.uint8)
        self.stats["pim_multiplies"] += 1
        self.stats["pim_bit_ops"] += self._cols
        if self.trace_enabled:
            self._record(Mode.PIM_MULTIPLY, f"row={r} operand={_bitstr(op)}", _bitstr(out))
        self._finish()
        return out

    # -- images and traces ---------------------------------------------------

    def to_text(self):
        return "\n".join(_bitstr(row) for row in self._storage) + "\n"

    def save_text(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text, trace=False):
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty array image")
        width = len(lines[0])
        for i, ln in enumerate(lines, 1):
            if len(ln) != width:
                raise LengthMismatch(f"line {i}: expected {width} bits, got {len(ln)}")
            if set(ln) - {"0", "1"}:
                raise ValueError(f"line {i}: only '0' and '1' allowed")
        arr = cls(len(lines), width, trace=trace)
        arr.load(np.array([[int(ch) for ch in ln] for ln in lines], dtype=np.uint8))
        return arr

    @classmethod
    def load_text(cls, path, trace=False):
        return cls.from_text(Path(path).read_text(), trace=trace)

    def save_csv(self, path):
        np.savetxt(path, self._storage, fmt="%d", delimiter=",")

    @classmethod
    def load_csv(cls, path, trace=False):
        m = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
        if not np.all((m == 0) | (m == 1)):
            raise ValueError("array CSV must contain only 0/1")
        arr = cls(m.shape[0], m.shape[1], trace=trace)
        arr.load(m.astype(np.uint8))
        return arr

    @classmethod
    def load_image(cls, path, trace=False):
        """Load a text image, or CSV when the file name ends in ``.csv``."""
        if str(path).endswith(".csv"):
            return cls.load_csv(path, trace=trace)
        return cls.load_text(path, trace=trace)

    def trace_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "mode", "inputs", "outputs"])
        for rec in self.trace:
            w.writerow([rec.step, rec.mode, rec.inputs, rec.outputs])
        return buf.getvalue()

    def write_trace(self, path):
        Path(path).write_text(self.trace_csv())

    def __repr__(self):
        return f"CellArray(rows={self._rows}, cols={self._cols})"
