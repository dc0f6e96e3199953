"""CAM-backed activation lookup tables and vector ReLU.

A table occupies 32 consecutive rows of a cell array: 16 key rows holding
every 4-bit code, followed (``VALUE_ROW_OFFSET`` rows later) by the 16
matching result codes.  Codes sit in columns 0..3, most significant bit
first.  A lookup is one binary CAM search restricted to the key rows and
the four key columns, then a row read of the paired value row.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cell_array import CellArray
from .mac import PrecisionMode, Signedness, _patterns
from .numformats import Codec, parse_codec

__all__ = [
    "LutError",
    "CapacityExceeded",
    "NoMatch",
    "MultipleMatch",
    "EmptyInput",
    "KEY_BITS",
    "VALUE_ROW_OFFSET",
    "FUNCTIONS",
    "LutTable",
    "build_lut",
    "lut_lookup",
    "relu_vector",
    "softmax",
]

KEY_BITS = 4
VALUE_ROW_OFFSET = 16
TABLE_ROWS = 32


class LutError(Exception):
    pass


class CapacityExceeded(LutError, ValueError):
    pass


class NoMatch(LutError):
    pass


class MultipleMatch(LutError):
    pass


class EmptyInput(LutError, ValueError):
    pass


def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


FUNCTIONS = {
    "sigmoid": _sigmoid,
    "tanh": math.tanh,
    "softmax_exp": math.exp,
}


def code_bits(code):
    return np.array([(code >> (KEY_BITS - 1 - i)) & 1 for i in range(KEY_BITS)], dtype=np.uint8)


def bits_code(bits):
    v = 0
    for b in bits[:KEY_BITS]:
        v = (v << 1) | int(b)
    return v


@dataclass
class LutTable:
    function: str
    codec: Codec
    array: CellArray
    base_row: int
    keys: np.ndarray
    values: np.ndarray

    @property
    def key_rows(self):
        return np.arange(self.base_row, self.base_row + 16)

    def value_row(self, match_index):
        return self.base_row + VALUE_ROW_OFFSET + match_index

    def entries(self):
        """(key_code, key_value, value_code, value_value) for all 16 rows."""
        return [(int(k), self.codec.decode(int(k)), int(v), self.codec.decode(int(v)))
                for k, v in zip(self.keys, self.values)]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key_code", "key_value_real", "value_code", "value_real"])
        for row in self.entries():
            w.writerow([row[0], repr(row[1]), row[2], repr(row[3])])
        return buf.getvalue()

    def save_csv(self, path):
        Path(path).write_text(self.to_csv())


def table_value(function, codec, code):
    """Reference result code for one key: encode(f(decode(key)))."""
    f = FUNCTIONS[function] if isinstance(function, str) else function
    x = codec.decode(code)
    if math.isnan(x):
        return codec.encode(math.nan)  # NaR in, NaR out
    y = f(x)
    if function == "softmax_exp":
        # exp is strictly positive; keep it off zero so normalisation is defined
        return codec.encode_positive(y)
    return codec.encode(y)


def build_lut(function, codec, array=None, base_row=0):
    """Write a 16-entry table for ``function`` into ``array`` starting at ``base_row``.

    ``function`` is a name from :data:`FUNCTIONS` or a callable; ``codec``
    a codec instance or name (``fp4``, ``posit4[:es]``).
    """
    if isinstance(codec, str):
        codec = parse_codec(codec)
    if isinstance(function, str) and function not in FUNCTIONS:
        raise ValueError(f"unknown function {function!r}; choose from {sorted(FUNCTIONS)} or pass a callable")
    array = array if array is not None else CellArray()
    if array.cols < KEY_BITS or base_row < 0 or base_row + TABLE_ROWS > array.rows:
        raise CapacityExceeded(f"a table needs rows {base_row}..{base_row + TABLE_ROWS - 1} and {KEY_BITS} columns "
                               f"of a {array.rows}x{array.cols} array")
    keys = np.arange(16)
    values = np.array([table_value(function, codec, int(k)) for k in keys])
    for i in range(16):
        row = np.zeros(array.cols, dtype=np.uint8)
        row[:KEY_BITS] = code_bits(int(keys[i]))
        array.write_row(base_row + i, row)
        row = np.zeros(array.cols, dtype=np.uint8)
        row[:KEY_BITS] = code_bits(int(values[i]))
        array.write_row(base_row + VALUE_ROW_OFFSET + i, row)
    label = function if isinstance(function, str) else "custom"
    return LutTable(label, codec, array, base_row, keys, values)


def lut_lookup(table, code):
    """Search the key rows for ``code`` and return the paired value code."""
    if not 0 <= int(code) < 16:
        raise ValueError(f"LUT key must be a 4-bit code, got {code}")
    match = table.array.bcam_search(code_bits(int(code)), rows=table.key_rows, columns=slice(0, KEY_BITS))
    hits = np.flatnonzero(match)
    if hits.size == 0:
        raise NoMatch(f"no key row matches code {code:04b}")
    if hits.size > 1:
        raise MultipleMatch(f"key rows {(table.base_row + hits).tolist()} all match code {code:04b}")
    return bits_code(table.array.read_row(table.value_row(int(hits[0]))))


def relu_vector(values, mode):
    """Element-wise max(0, v) by clearing words whose sign bit is set."""
    if isinstance(mode, int):
        mode = PrecisionMode(mode)
    arr = np.asarray(values)
    mode.check(arr)
    if mode.signedness is Signedness.UNSIGNED or arr.size == 0:
        return arr.copy()
    if mode.signedness is Signedness.BIPOLAR_BINARY:
        return np.where(arr > 0, arr, 0)
    sign = (_patterns(arr, mode.bits) >> np.uint64(mode.bits - 1)) & np.uint64(1)
    return np.where(sign.astype(bool), 0, arr)


def softmax(codes, codec, table=None):
    """Softmax over 4-bit codes: exp from the CAM table, normalisation on the host."""
    codes = [int(c) for c in codes]
    if not codes:
        raise EmptyInput("softmax of an empty sequence")
    if isinstance(codec, str):
        codec = parse_codec(codec)
    if any(math.isnan(codec.decode(c)) for c in codes):
        raise ValueError("softmax input contains NaR")
    table = table or build_lut("softmax_exp", codec)
    exps = np.array([codec.decode(lut_lookup(table, c)) for c in codes], dtype=np.float64)
    return exps / exps.sum()
