"""Variable-precision SIMD multiply-accumulate on the simulated macro.

An ``n x n`` multiply occupies an ``n x n`` block of cells ("lane"): block
row ``j`` holds a copy of the weight bits and is driven with input bit
``j``.  The cells produce the ``n**2`` single-bit partial products which a
compressor tree reduces with their shift weights ``j + k``.  With 64 x 64
cells this gives ``4096 / n**2`` lanes per pass.

Partial products:

* unsigned: the cell XNOR of weight bit and input bit, gated by the input
  bit (the driver leaves the match-line segment discharged when the input
  bit is 0), i.e. ``a_j AND w_k``;
* two's complement: the same products with the ``n-1`` row/column terms
  complemented plus the constant ``2**n - 2**(2n-1)`` per product
  (Baugh-Wooley), all modulo the accumulator width;
* bipolar binary (n = 1): raw XNOR, value ``2 * popcount - N``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .cell_array import CellArray, sense_xnor
from .compressor import exact_spec, int_to_bits, tree_for

__all__ = [
    "MacError",
    "OperandOutOfRange",
    "CapacityExceeded",
    "ModeMismatch",
    "LengthMismatch",
    "Signedness",
    "PrecisionMode",
    "MODES",
    "MacResult",
    "OpTally",
    "pass_cycles",
    "accumulator_width",
    "xac",
    "xac_batch",
    "mac",
    "mac_batch",
    "dot",
    "dot_batch",
    "simd_pass",
    "lane_pack",
    "lane_unpack",
]

SUPPORTED_BITS = (1, 2, 4, 8, 16, 32, 64)


class MacError(Exception):
    pass


class OperandOutOfRange(MacError, ValueError):
    pass


class CapacityExceeded(MacError, ValueError):
    pass


class ModeMismatch(MacError, ValueError):
    pass


class LengthMismatch(MacError, ValueError):
    pass


class Signedness(str, enum.Enum):
    UNSIGNED = "unsigned"
    TWOS_COMPLEMENT = "twos_complement"
    BIPOLAR_BINARY = "bipolar_binary"


@dataclass(frozen=True)
class PrecisionMode:
    bits: int
    signedness: Signedness = Signedness.TWOS_COMPLEMENT
    rows: int = 64
    cols: int = 64

    def __post_init__(self):
        if self.bits not in SUPPORTED_BITS:
            raise ValueError(f"bits must be one of {SUPPORTED_BITS}, got {self.bits}")
        object.__setattr__(self, "signedness", Signedness(self.signedness))
        if self.signedness is Signedness.BIPOLAR_BINARY and self.bits != 1:
            raise ValueError("bipolar_binary is only defined for 1-bit operands")
        if self.bits > min(self.rows, self.cols) or self.rows % self.bits or self.cols % self.bits:
            raise ValueError(f"{self.bits}-bit lanes do not tile a {self.rows}x{self.cols} array")

    @classmethod
    def parse(cls, name, **kw):
        """'int8', 'uint4', 'bin', 'int1' ... -> PrecisionMode."""
        name = name.lower()
        if name in ("bin", "binary", "xnor", "bipolar"):
            return cls(1, Signedness.BIPOLAR_BINARY, **kw)
        if name.startswith("uint"):
            return cls(int(name[4:]), Signedness.UNSIGNED, **kw)
        if name.startswith("int"):
            return cls(int(name[3:]), Signedness.TWOS_COMPLEMENT, **kw)
        raise ValueError(f"unknown precision mode {name!r}")

    @property
    def lanes(self):
        return (self.rows // self.bits) * (self.cols // self.bits)

    @property
    def lanes_per_row(self):
        return self.cols // self.bits

    @property
    def lo(self):
        if self.signedness is Signedness.UNSIGNED:
            return 0
        if self.signedness is Signedness.BIPOLAR_BINARY:
            return -1
        return -(1 << (self.bits - 1))

    @property
    def hi(self):
        if self.signedness is Signedness.UNSIGNED:
            return (1 << self.bits) - 1
        if self.signedness is Signedness.BIPOLAR_BINARY:
            return 1
        return (1 << (self.bits - 1)) - 1

    def check(self, values):
        arr = np.asarray(values)
        if arr.size == 0:
            return
        if self.signedness is Signedness.BIPOLAR_BINARY:
            if not np.all((arr == 1) | (arr == -1)):
                raise OperandOutOfRange("bipolar operands must be +1 or -1")
            return
        lo, hi = arr.min(), arr.max()
        if lo < self.lo or hi > self.hi:
            raise OperandOutOfRange(f"operands [{lo}, {hi}] outside {self.name} range [{self.lo}, {self.hi}]")

    @property
    def name(self):
        if self.signedness is Signedness.BIPOLAR_BINARY:
            return "bin"
        return ("uint" if self.signedness is Signedness.UNSIGNED else "int") + str(self.bits)


MODES = {n: PrecisionMode(n) for n in SUPPORTED_BITS}


def pass_cycles(bits):
    """Cycles of one macro pass: n**2 partial-product cycles + ceil(log4(n**2)) + 1 reduction."""
    return bits * bits + math.ceil(math.log2(bits)) + 1 if bits > 1 else 2


def accumulator_width(bits, elements):
    return 2 * bits + (math.ceil(math.log2(elements)) if elements > 1 else 0)


@dataclass
class OpTally:
    """Bit-level operation counts consumed by the performance model."""

    ops: int = 0  # arithmetic ops credited (multiply + add per MAC)
    pim_bit_ops: int = 0
    cam_search_bits: int = 0
    passes: dict = field(default_factory=dict)  # precision bits -> macro passes

    def __add__(self, other):
        passes = dict(self.passes)
        for k, v in other.passes.items():
            passes[k] = passes.get(k, 0) + v
        return OpTally(self.ops + other.ops, self.pim_bit_ops + other.pim_bit_ops,
                       self.cam_search_bits + other.cam_search_bits, passes)

    def to_dict(self):
        return {"ops": self.ops, "pim_bit_ops": self.pim_bit_ops, "cam_search_bits": self.cam_search_bits,
                "passes": {str(k): v for k, v in sorted(self.passes.items())}}


@dataclass
class MacResult:
    values: np.ndarray
    width: int
    mode: PrecisionMode
    cycle_count: int = 0
    bit_op_count: int = 0
    passes: int = 0
    macs: int = 0

    def tally(self):
        return OpTally(ops=2 * self.macs, pim_bit_ops=self.bit_op_count,
                       passes={self.mode.bits: self.passes})


# ---------------------------------------------------------------------------
# operand encoding


def _as_int_array(values):
    arr = np.asarray(values)
    if arr.dtype == object or arr.dtype.kind not in "iub":
        return np.array(values, dtype=object)
    return arr.astype(np.int64)


def _patterns(values, bits):
    """Integers -> their ``bits``-wide two's complement patterns (uint64)."""
    arr = np.asarray(values)
    if arr.dtype == object:
        mask = (1 << bits) - 1
        return np.array([int(v) & mask for v in arr.ravel()], dtype=np.uint64).reshape(arr.shape)
    if bits == 64:
        return arr.astype(np.int64).view(np.uint64)
    return (arr.astype(np.int64) & ((1 << bits) - 1)).astype(np.uint64)


def _bit_planes(values, bits):
    """(...,) integers -> (..., bits) LSB-first bits."""
    pats = _patterns(values, bits)
    shifts = np.arange(bits, dtype=np.uint64)
    return ((pats[..., None] >> shifts) & np.uint64(1)).astype(np.uint8)


def _partial_products(a_bits, w_bits, mode):
    """(B, L, n) input bits x (B, L, n) weight bits -> (B, L, n, n) partial products."""
    xnor = sense_xnor(w_bits[..., None, :], a_bits[..., :, None])
    if mode.signedness is Signedness.BIPOLAR_BINARY:
        return xnor
    pp = xnor & a_bits[..., :, None]
    if mode.signedness is Signedness.TWOS_COMPLEMENT and mode.bits > 1:
        n = mode.bits
        flip = np.zeros((n, n), dtype=np.uint8)
        flip[n - 1, : n - 1] = 1
        flip[: n - 1, n - 1] = 1
        pp = pp ^ flip
    return pp


def _correction(mode, elements, width):
    if mode.signedness is not Signedness.TWOS_COMPLEMENT or mode.bits == 1:
        return 0
    n = mode.bits
    return (elements * ((1 << n) - (1 << (2 * n - 1)))) % (1 << width)


def _reduce(pp, mode, spec, approx_columns=None):
    """Reduce (B, L, n, n) partial products to signed/unsigned dot products."""
    batch, elements, n, _ = pp.shape
    width = accumulator_width(n, elements)
    corr = _correction(mode, elements, width)
    const_cols = [c for c in range(width) if (corr >> c) & 1]
    jk = (np.arange(n)[:, None] + np.arange(n)[None, :]).ravel()
    columns = tuple(np.tile(jk, elements).tolist()) + tuple(const_cols)
    tree = tree_for(columns, width)
    bits = pp.reshape(batch, elements * n * n)
    if const_cols:
        bits = np.concatenate([bits, np.ones((batch, len(const_cols)), dtype=np.uint8)], axis=1)
    if approx_columns == "half":
        approx_columns = n // 2
    raw = tree.evaluate(spec, bits, exact_from=approx_columns)
    if mode.signedness is Signedness.TWOS_COMPLEMENT:
        half = 1 << (width - 1)
        raw = np.where(raw >= half, raw - (1 << width), raw)
        if raw.dtype != object and width > 62:
            raw = raw.astype(object)
    return raw, width


def _bipolar_bits(values):
    return (np.asarray(values) > 0).astype(np.uint8)


# ---------------------------------------------------------------------------
# operations


def xac_batch(inputs, weights, spec=None):
    """Bipolar XNOR-accumulate of (B, N) bit matrices: 2 * popcount(XNOR) - N."""
    spec = spec or exact_spec()
    a = np.asarray(inputs, dtype=np.uint8)
    w = np.asarray(weights, dtype=np.uint8)
    if a.shape != w.shape:
        raise LengthMismatch(f"inputs {a.shape} and weights {w.shape} differ")
    if a.shape[-1] > 4096:
        raise CapacityExceeded("XAC supports at most 4096 elements per pass")
    n = a.shape[-1]
    if n == 0:
        return np.zeros(a.shape[0], dtype=np.int64)
    tree = tree_for((0,) * n)
    return 2 * tree.evaluate(spec, sense_xnor(w, a)) - n


def xac(inputs, weights, spec=None, array=None):
    """XNOR-accumulate through the cell array.

    Weights are written row-major into ``array`` (a fresh 64 x 64 array by
    default), each row is multiplied with its slice of the inputs and the
    sensed XNOR bits are popcounted by the compressor tree.
    """
    spec = spec or exact_spec()
    a = np.asarray(inputs, dtype=np.uint8).ravel()
    w = np.asarray(weights, dtype=np.uint8).ravel()
    if a.shape != w.shape:
        raise LengthMismatch(f"inputs ({a.size}) and weights ({w.size}) differ in length")
    array = array if array is not None else CellArray()
    if a.size > array.rows * array.cols:
        raise CapacityExceeded(f"XAC of {a.size} elements exceeds {array.rows * array.cols} cells")
    n = a.size
    cols = array.cols
    products = []
    for r in range(math.ceil(n / cols)):
        seg = slice(r * cols, min((r + 1) * cols, n))
        row_w = np.zeros(cols, dtype=np.uint8)
        row_a = np.zeros(cols, dtype=np.uint8)
        row_w[: seg.stop - seg.start] = w[seg]
        row_a[: seg.stop - seg.start] = a[seg]
        array.write_row(r, row_w)
        products.append(array.pim_multiply_row(r, row_a)[: seg.stop - seg.start])
    if n == 0:
        return 0
    xnor = np.concatenate(products)
    return int(2 * tree_for((0,) * n).evaluate(spec, xnor) - n)


def _prepare(inputs, weights, mode):
    a = _as_int_array(inputs)
    w = _as_int_array(weights)
    if a.shape != w.shape:
        raise LengthMismatch(f"inputs {a.shape} and weights {w.shape} differ")
    mode.check(a)
    mode.check(w)
    return a, w


def mac_batch(inputs, weights, mode, spec=None, approx_columns=None):
    """Dot products of (B, L) operand matrices, one per row, in one pass each.

    ``approx_columns`` limits ``spec`` to compressors in the lowest output
    columns; higher columns then use the exact compressor.  ``"half"``
    means the lowest ``bits // 2`` columns.
    """
    spec = spec or exact_spec()
    a, w = _prepare(inputs, weights, mode)
    if a.ndim != 2:
        raise LengthMismatch("mac_batch expects (batch, length) operands")
    batch, elements = a.shape
    if elements > mode.lanes:
        raise CapacityExceeded(f"{elements} elements exceed {mode.lanes} {mode.name} lanes")
    if elements == 0:
        return MacResult(np.zeros(batch, dtype=np.int64), 0, mode)
    if mode.signedness is Signedness.BIPOLAR_BINARY:
        values = xac_batch(_bipolar_bits(a), _bipolar_bits(w), spec)
        width = max(1, elements.bit_length()) + 1
    else:
        pp = _partial_products(_bit_planes(a, mode.bits), _bit_planes(w, mode.bits), mode)
        values, width = _reduce(pp, mode, spec, approx_columns)
    n2 = mode.bits * mode.bits
    return MacResult(values, width, mode, cycle_count=batch * pass_cycles(mode.bits),
                     bit_op_count=2 * batch * elements * n2, passes=batch, macs=batch * elements)


def mac(inputs, weights, mode, spec=None, array=None):
    """One dot product computed on a cell array holding the lane-packed weights."""
    spec = spec or exact_spec()
    a, w = _prepare(inputs, weights, mode)
    a, w = a.ravel(), w.ravel()
    if a.size > mode.lanes:
        raise CapacityExceeded(f"{a.size} elements exceed {mode.lanes} {mode.name} lanes")
    array = lane_pack(w, mode, array)
    pp = _sense_lanes(array, a, mode)[: a.size]
    if a.size == 0:
        return MacResult(0, 0, mode)
    if mode.signedness is Signedness.BIPOLAR_BINARY:
        n = a.size
        value = int(2 * tree_for((0,) * n).evaluate(spec, pp.reshape(n)) - n)
        width = max(1, n.bit_length()) + 1
    else:
        values, width = _reduce(pp[None], mode, spec)
        value = int(values[0])
    return MacResult(value, width, mode, cycle_count=pass_cycles(mode.bits),
                     bit_op_count=2 * a.size * mode.bits ** 2, passes=1, macs=a.size)


def dot_batch(inputs, weights, mode, spec=None, approx_columns=None):
    """Dot products longer than one pass: per-pass results summed on the host."""
    a, w = _prepare(inputs, weights, mode)
    batch, length = a.shape
    total = None
    cycles = bit_ops = passes = macs = 0
    width = 0
    for start in range(0, max(length, 1), mode.lanes):
        r = mac_batch(a[:, start:start + mode.lanes], w[:, start:start + mode.lanes], mode, spec, approx_columns)
        total = r.values if total is None else total + r.values
        cycles += r.cycle_count
        bit_ops += r.bit_op_count
        passes += r.passes
        macs += r.macs
        width = max(width, r.width)
    if length > mode.lanes:
        width += math.ceil(math.log2(math.ceil(length / mode.lanes)))
    return MacResult(total, width, mode, cycles, bit_ops, passes, macs)


def dot(inputs, weights, mode, spec=None):
    r = dot_batch(np.asarray(inputs)[None], np.asarray(weights)[None], mode, spec)
    r.values = r.values[0]
    return r


# ---------------------------------------------------------------------------
# lane layout


def _lane_origin(lane, mode):
    br, bc = divmod(lane, mode.lanes_per_row)
    return br * mode.bits, bc * mode.bits


def lane_pack(weights, mode, array=None):
    """Write weights into their lanes; each lane row holds a copy of the weight bits.

    Lane ``l`` is the ``n x n`` block at block-row ``l // (cols/n)`` and
    block-column ``l % (cols/n)``; weight bit ``k`` (LSB first) sits in
    block column ``k``.  Unused lanes are zero.
    """
    w = _as_int_array(weights).ravel()
    mode.check(w)
    if w.size > mode.lanes:
        raise CapacityExceeded(f"{w.size} weights exceed {mode.lanes} {mode.name} lanes")
    array = array if array is not None else CellArray(mode.rows, mode.cols)
    if array.shape != (mode.rows, mode.cols):
        raise ModeMismatch(f"array {array.shape} does not match mode geometry {(mode.rows, mode.cols)}")
    n = mode.bits
    if mode.signedness is Signedness.BIPOLAR_BINARY:
        bits = _bipolar_bits(w)[:, None]
    else:
        bits = _bit_planes(w, n)
    image = np.zeros(array.shape, dtype=np.uint8)
    for lane in range(w.size):
        r0, c0 = _lane_origin(lane, mode)
        image[r0:r0 + n, c0:c0 + n] = bits[lane][None, :]
    array.load(image)
    return array


def lane_unpack(array, mode, count=None):
    """Inverse of :func:`lane_pack`; raises ModeMismatch if a lane's rows disagree."""
    if array.shape != (mode.rows, mode.cols):
        raise ModeMismatch(f"array {array.shape} does not match mode geometry {(mode.rows, mode.cols)}")
    count = mode.lanes if count is None else count
    if count > mode.lanes:
        raise CapacityExceeded(f"{count} lanes requested, mode has {mode.lanes}")
    n = mode.bits
    image = np.asarray(array.storage)
    out = []
    for lane in range(count):
        r0, c0 = _lane_origin(lane, mode)
        block = image[r0:r0 + n, c0:c0 + n]
        if np.any(block != block[0]):
            raise ModeMismatch(f"lane {lane} rows are not copies of one {n}-bit weight")
        bits = block[0]
        if mode.signedness is Signedness.BIPOLAR_BINARY:
            out.append(1 if bits[0] else -1)
            continue
        v = sum(int(b) << k for k, b in enumerate(bits))
        if mode.signedness is Signedness.TWOS_COMPLEMENT and bits[-1]:
            v -= 1 << n
        out.append(v)
    return np.array(out, dtype=object if n > 62 else np.int64)


def _sense_lanes(array, inputs, mode):
    """Drive each array row with the input bits of the lanes it crosses.

    Returns (lanes, n, n) partial products read off the match-line segments.
    """
    n = mode.bits
    lanes = mode.lanes
    a = np.zeros(lanes, dtype=object if n > 62 else np.int64)
    a[: inputs.size] = inputs
    if mode.signedness is Signedness.BIPOLAR_BINARY:
        a_bits = _bipolar_bits(np.where(np.arange(lanes) < inputs.size, a, 1))[:, None]
    else:
        a_bits = _bit_planes(a, n)  # (lanes, n)
    lanes_per_row = mode.lanes_per_row
    pp = np.zeros((lanes, n, n), dtype=np.uint8)
    for r in range(array.rows):
        br, j = divmod(r, n)
        row_lanes = np.arange(br * lanes_per_row, (br + 1) * lanes_per_row)
        operand = np.repeat(a_bits[row_lanes, j], n)
        sensed = array.pim_multiply_row(r, operand).reshape(lanes_per_row, n)
        if mode.signedness is not Signedness.BIPOLAR_BINARY:
            sensed = sensed & operand.reshape(lanes_per_row, n)
        pp[row_lanes, j, :] = sensed
    if mode.signedness is Signedness.TWOS_COMPLEMENT and n > 1:
        flip = np.zeros((n, n), dtype=np.uint8)
        flip[n - 1, : n - 1] = 1
        flip[: n - 1, n - 1] = 1
        pp ^= flip
    return pp


def simd_pass(input_matrix, weight_array, mode, spec=None):
    """All lanes of the macro in parallel: lane ``l`` computes ``input[l] * weight[l]``.

    ``input_matrix`` has one value per lane, or shape (passes, lanes) to
    accumulate several passes per lane in a host-side wide accumulator.
    Each lane is reduced by its own compressor tree.
    """
    spec = spec or exact_spec()
    inputs = _as_int_array(input_matrix)
    if inputs.ndim == 1:
        inputs = inputs[None]
    if inputs.ndim != 2 or inputs.shape[1] != mode.lanes:
        raise ModeMismatch(f"{mode.name} pass needs {mode.lanes} inputs per pass, got shape {inputs.shape}")
    if weight_array.shape != (mode.rows, mode.cols):
        raise ModeMismatch(f"array {weight_array.shape} does not match mode geometry")
    lane_unpack(weight_array, mode)  # layout check
    mode.check(inputs)
    n = mode.bits
    acc = None
    for p in range(inputs.shape[0]):
        pp = _sense_lanes(weight_array, inputs[p], mode)
        if mode.signedness is Signedness.BIPOLAR_BINARY:
            vals = 2 * pp.reshape(-1).astype(np.int64) - 1
            width = 2
        else:
            vals, width = _reduce(pp[:, None], mode, spec)
        acc = vals if acc is None else acc + vals
    passes = inputs.shape[0]
    if passes > 1:
        width += math.ceil(math.log2(passes))
    return MacResult(acc, width, mode, cycle_count=passes * pass_cycles(n),
                     bit_op_count=passes * 2 * mode.rows * mode.cols, passes=passes, macs=passes * mode.lanes)
