"""4:2 compressor primitives, Wallace-style reduction trees and error metrics.

A compressor takes four addend bits plus a carry-in and produces ``sum``
(weight 1), ``carry`` (weight 2) and ``cout`` (weight 2).  ``cout`` only
depends on the four addend bits, so the carry chain between neighbouring
compressors of the same layer never ripples.

Trees are built once from the column layout of their inputs and then
evaluated on a whole batch of bit vectors at a time with numpy.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "CompressorError",
    "IncompleteSpec",
    "InvalidSpec",
    "WidthExceeded",
    "SpaceTooLarge",
    "CompressorSpec",
    "ReductionTree",
    "ErrorMetrics",
    "exact_spec",
    "approximate_spec",
    "search_approximate_spec",
    "build_tree",
    "tree_for",
    "int_to_bits",
    "bits_to_int",
    "entry_index",
    "entry_bits",
    "stage1_candidates",
    "compress42",
    "popcount",
    "accumulate",
    "error_metrics",
    "transistor_count",
    "parse_policy",
]


class CompressorError(Exception):
    pass


class IncompleteSpec(CompressorError):
    pass


class InvalidSpec(CompressorError):
    pass


class WidthExceeded(CompressorError, ValueError):
    pass


class SpaceTooLarge(CompressorError, ValueError):
    pass


def entry_index(x1, x2, x3, x4, cin):
    return (x1 << 4) | (x2 << 3) | (x3 << 2) | (x4 << 1) | cin


def entry_bits(index):
    return tuple((index >> s) & 1 for s in (4, 3, 2, 1, 0))


@dataclass(frozen=True)
class CompressorSpec:
    """Truth table of a 4:2 compressor.

    ``table`` has shape (32, 3) holding (sum, carry, cout) for the input
    index ``x1<<4 | x2<<3 | x3<<2 | x4<<1 | cin``.  ``delay_ns`` and
    ``power_uw`` are user-supplied figures carried along for reports; they
    are not simulated.
    """

    table: np.ndarray
    transistor_count: int = 0
    label: str = "custom"
    delay_ns: float | None = None
    power_uw: float | None = None

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.uint8)
        if table.shape != (32, 3):
            raise IncompleteSpec(f"truth table must have 32 entries of 3 outputs, got shape {table.shape}")
        if np.any(table > 1):
            raise InvalidSpec("truth table outputs must be bits")
        cout = table[:, 2].reshape(16, 2)
        if np.any(cout[:, 0] != cout[:, 1]):
            raise InvalidSpec(f"{self.label}: cout must not depend on cin")
        if self.transistor_count < 0:
            raise InvalidSpec("transistor_count must be non-negative")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    # lookup tables used by the vectorised evaluator
    @property
    def sum_table(self):
        return self.table[:, 0]

    @property
    def carry_table(self):
        return self.table[:, 1]

    @property
    def cout_table(self):
        """cout indexed by ``x1<<3 | x2<<2 | x3<<1 | x4``."""
        return self.table[0::2, 2]

    def values(self):
        """Represented value ``sum + 2*(carry + cout)`` for every entry."""
        t = self.table.astype(np.int64)
        return t[:, 0] + 2 * (t[:, 1] + t[:, 2])

    def errors(self):
        """Signed value error of every entry against the true input count."""
        counts = np.array([sum(entry_bits(i)) for i in range(32)])
        return self.values() - counts

    @property
    def is_exact(self):
        return not np.any(self.errors())

    @property
    def max_entry_error(self):
        return int(np.abs(self.errors()).max())

    def with_flipped(self, index, output, label=None):
        """Copy of the spec with one output bit inverted on one entry."""
        table = self.table.copy()
        col = {"sum": 0, "carry": 1, "cout": 2}[output]
        rows = [index]
        if col == 2:
            rows = [index & ~1, index | 1]
        table[rows, col] ^= 1
        return CompressorSpec(table, self.transistor_count, label or f"{self.label}-flip", self.delay_ns, self.power_uw)

    # file format: 32 lines "x1 x2 x3 x4 cin : sum carry cout", '#' comments
    def dumps(self):
        lines = [f"# label: {self.label}", f"# transistors: {self.transistor_count}"]
        if self.delay_ns is not None:
            lines.append(f"# delay_ns: {self.delay_ns}")
        if self.power_uw is not None:
            lines.append(f"# power_uw: {self.power_uw}")
        for i in range(32):
            s, c, co = (int(v) for v in self.table[i])
            lines.append(" ".join(map(str, entry_bits(i))) + f" : {s} {c} {co}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text, label=None):
        meta = {}
        table = np.full((32, 3), 255, dtype=np.uint8)
        seen = set()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
                continue
            lhs, sep, rhs = line.partition(":")
            try:
                ins = [int(v) for v in lhs.split()]
                outs = [int(v) for v in rhs.split()]
            except ValueError:
                raise InvalidSpec(f"line {lineno}: non-integer field in {raw!r}") from None
            if not sep or len(ins) != 5 or len(outs) != 3 or any(v not in (0, 1) for v in ins + outs):
                raise InvalidSpec(f"line {lineno}: expected 'x1 x2 x3 x4 cin : sum carry cout', got {raw!r}")
            idx = entry_index(*ins)
            if idx in seen:
                raise InvalidSpec(f"line {lineno}: duplicate entry {ins}")
            seen.add(idx)
            table[idx] = outs
        if len(seen) != 32:
            raise IncompleteSpec(f"truth table has {len(seen)} of 32 entries")
        return cls(
            table,
            transistor_count=int(meta.get("transistors", 0)),
            label=label or meta.get("label", "custom"),
            delay_ns=float(meta["delay_ns"]) if "delay_ns" in meta else None,
            power_uw=float(meta["power_uw"]) if "power_uw" in meta else None,
        )

    @classmethod
    def load(cls, path):
        return cls.loads(Path(path).read_text())

    def __eq__(self, other):
        if not isinstance(other, CompressorSpec):
            return NotImplemented
        return np.array_equal(self.table, other.table) and self.transistor_count == other.transistor_count

    def __hash__(self):
        return hash((self.table.tobytes(), self.transistor_count))


def _exact_table():
    table = np.zeros((32, 3), dtype=np.uint8)
    for i in range(32):
        x1, x2, x3, x4, cin = entry_bits(i)
        # stage 1: full adder on x1..x3, stage 2: full adder on (s1, x4, cin)
        p = x1 ^ x2
        cout = x3 if p else x1
        s1 = p ^ x3
        q = s1 ^ x4
        table[i] = (q ^ cin, cin if q else x4, cout)
    return table


@functools.lru_cache(maxsize=None)
def exact_spec(transistor_count=56):
    """Exact compressor; 56 transistors is the conventional two-full-adder build."""
    return CompressorSpec(_exact_table(), transistor_count, "exact" if transistor_count == 56 else f"exact-{transistor_count}T")


APPROX_SPEC_PATH = Path(__file__).with_name("data") / "c22t_approx.ctt"


@functools.lru_cache(maxsize=None)
def approximate_spec():
    """The shipped 22-transistor approximate compressor (see ``search_approximate_spec``)."""
    return CompressorSpec.load(APPROX_SPEC_PATH)


# ---------------------------------------------------------------------------
# reduction trees


@dataclass
class Layer:
    # compressors: inputs (k, 5) wire ids [x1, x2, x3, x4, cin], outputs (k, 3) [sum, carry, cout]
    comp_in: np.ndarray
    comp_out: np.ndarray
    comp_col: np.ndarray
    # exact full adders: inputs (m, 3), outputs (m, 2) [sum, carry]
    fa_in: np.ndarray
    fa_out: np.ndarray


@dataclass
class ReductionTree:
    """Column-compression tree over ``width`` input bits.

    Wire 0 is constant 0, wire 1 constant 1, wires ``2 .. 2+width`` the
    inputs in the order given to :func:`build_tree`.  ``final_rows`` holds
    the two wire ids per output column fed to the ripple carry-propagate
    adder; the sum is taken modulo ``2**output_width``.
    """

    width: int
    input_columns: np.ndarray
    layers: list[Layer]
    final_rows: np.ndarray
    output_width: int
    n_wires: int

    @property
    def depth(self):
        return len(self.layers)

    @property
    def n_compressors(self):
        return sum(len(l.comp_in) for l in self.layers)

    @property
    def n_full_adders(self):
        return sum(len(l.fa_in) for l in self.layers)

    def compressor_columns(self):
        if not self.layers:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([l.comp_col for l in self.layers])

    def error_bound(self, spec):
        """Upper bound on |tree(spec) - exact sum| before the output modulus."""
        return spec.max_entry_error * int(sum(1 << int(c) for c in self.compressor_columns()))

    def evaluate(self, spec, bits, chunk=4096, exact_from=None):
        """Reduce a batch of input bit vectors.

        ``bits`` has shape (batch, width) or (width,); returns the output
        words as int64 (object dtype when the output exceeds 62 bits).
        With ``exact_from`` set, compressors in columns ``>= exact_from``
        use the exact table and only the lower columns use ``spec``.
        """
        bits = np.asarray(bits, dtype=np.uint8)
        single = bits.ndim == 1
        if single:
            bits = bits[None, :]
        if bits.shape[1] != self.width:
            raise ValueError(f"tree expects {self.width} input bits, got {bits.shape[1]}")
        out = [self._evaluate_chunk(spec, bits[i:i + chunk], exact_from) for i in range(0, bits.shape[0], chunk)]
        result = np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
        return result[0] if single else result

    def output_bits(self, spec, bits, exact_from=None):
        """Output bit matrix (batch, output_width), LSB first."""
        bits = np.asarray(bits, dtype=np.uint8)
        v = np.empty((self.n_wires, bits.shape[0]), dtype=np.uint8)
        v[0] = 0
        v[1] = 1
        v[2:2 + self.width] = bits.T
        sum_t, carry_t, cout_t = spec.sum_table, spec.carry_table, spec.cout_table
        hybrid = exact_from is not None and not spec.is_exact
        if hybrid:
            ex = exact_spec()
            # stack [approximate; exact] tables, offset selects the exact half
            sum_t = np.concatenate([sum_t, ex.sum_table])
            carry_t = np.concatenate([carry_t, ex.carry_table])
            cout_t = np.concatenate([cout_t, ex.cout_table])
        for layer in self.layers:
            if len(layer.comp_in):
                x = v[layer.comp_in[:, :4]]
                xi = (x[:, 0] << 3) | (x[:, 1] << 2) | (x[:, 2] << 1) | x[:, 3]
                if hybrid:
                    xi = xi + (layer.comp_col >= exact_from).astype(np.uint8)[:, None] * 16
                # couts first: they may feed cins and full adders of this layer
                v[layer.comp_out[:, 2]] = cout_t[xi]
            if len(layer.fa_in):
                a, b, c = v[layer.fa_in[:, 0]], v[layer.fa_in[:, 1]], v[layer.fa_in[:, 2]]
                v[layer.fa_out[:, 0]] = a ^ b ^ c
                v[layer.fa_out[:, 1]] = (a & b) | (c & (a ^ b))
            if len(layer.comp_in):
                idx = (xi.astype(np.int64) << 1) | v[layer.comp_in[:, 4]]
                v[layer.comp_out[:, 0]] = sum_t[idx]
                v[layer.comp_out[:, 1]] = carry_t[idx]
        # ripple carry-propagate stage
        out = np.empty((bits.shape[0], self.output_width), dtype=np.uint8)
        carry = np.zeros(bits.shape[0], dtype=np.uint8)
        for j in range(self.output_width):
            a, b = v[self.final_rows[j, 0]], v[self.final_rows[j, 1]]
            out[:, j] = a ^ b ^ carry
            carry = (a & b) | (carry & (a ^ b))
        return out

    def _evaluate_chunk(self, spec, bits, exact_from=None):
        return bits_to_int(self.output_bits(spec, bits, exact_from))


def bits_to_int(bits):
    """(batch, w) LSB-first bit matrix -> integer vector."""
    w = bits.shape[1]
    if w <= 62:
        return bits.astype(np.int64) @ (np.int64(1) << np.arange(w, dtype=np.int64))
    out = np.zeros(bits.shape[0], dtype=object)
    for j in range(w):
        out += bits[:, j].astype(object) * (1 << j)
    return out


def build_tree(columns, output_width=None):
    """Build a reduction tree for input bits of the given column weights.

    Each layer, column by column from the LSB: groups of four bits feed a
    4:2 compressor whose cin takes a cout arriving from the column below
    (or a leftover bit, else constant 0); three leftover wires go through
    an exact full adder; at most two pass through.  Layers are added until
    every column holds at most two wires.
    """
    columns = np.asarray(columns, dtype=np.int64)
    if columns.size and columns.min() < 0:
        raise ValueError("columns must be non-negative")
    width = int(columns.size)
    next_wire = 2 + width
    cols: dict[int, list[int]] = {}
    for i, c in enumerate(columns):
        cols.setdefault(int(c), []).append(2 + i)

    def new_wire():
        nonlocal next_wire
        next_wire += 1
        return next_wire - 1

    layers = []
    while cols and max(len(v) for v in cols.values()) > 2:
        new_cols: dict[int, list[int]] = {}
        comp_in, comp_out, comp_col, fa_in, fa_out = [], [], [], [], []
        incoming: list[int] = []
        c = min(cols)
        top = max(cols)
        while c <= top or incoming:
            bits = list(cols.get(c, []))
            cins, incoming = incoming, []
            here = new_cols.setdefault(c, [])
            if len(bits) + len(cins) <= 2:
                here.extend(bits + cins)
                c += 1
                continue
            placed = []
            while len(bits) >= 4:
                x, bits = bits[:4], bits[4:]
                placed.append(x)
            leftover = bits + cins
            # couts of this column are only usable one column up
            outs = []
            for x in placed:
                cin = 0
                if cins:
                    cin = cins.pop(0)
                    leftover.remove(cin)
                elif leftover and bits:
                    cin = bits.pop(0)
                    leftover.remove(cin)
                s, cy, co = new_wire(), new_wire(), new_wire()
                comp_in.append(x + [cin])
                comp_out.append([s, cy, co])
                comp_col.append(c)
                here.append(s)
                new_cols.setdefault(c + 1, []).append(cy)
                outs.append(co)
            while len(leftover) >= 3:
                a = leftover[:3]
                leftover = leftover[3:]
                s, cy = new_wire(), new_wire()
                fa_in.append(a)
                fa_out.append([s, cy])
                here.append(s)
                new_cols.setdefault(c + 1, []).append(cy)
            here.extend(leftover)
            incoming = outs
            c += 1
        layers.append(Layer(
            np.array(comp_in, dtype=np.int64).reshape(-1, 5),
            np.array(comp_out, dtype=np.int64).reshape(-1, 3),
            np.array(comp_col, dtype=np.int64),
            np.array(fa_in, dtype=np.int64).reshape(-1, 3),
            np.array(fa_out, dtype=np.int64).reshape(-1, 2),
        ))
        cols = {k: v for k, v in new_cols.items() if v}

    if output_width is None:
        max_sum = int(sum(1 << int(c) for c in columns))
        output_width = max(max_sum.bit_length(), 1)
    final = np.zeros((output_width, 2), dtype=np.int64)
    for c, wires in cols.items():
        if c < output_width:
            final[c, :len(wires)] = wires
    return ReductionTree(width, columns, layers, final, int(output_width), next_wire)


@functools.lru_cache(maxsize=256)
def _cached_tree(columns, output_width):
    return build_tree(np.array(columns, dtype=np.int64), output_width)


def tree_for(columns, output_width=None):
    """Memoised :func:`build_tree`; ``columns`` must be hashable (tuple)."""
    return _cached_tree(tuple(int(c) for c in columns), output_width)


def transistor_count(tree, spec):
    """Structural cost: compressors in the tree times the spec's per-cell count."""
    return tree.n_compressors * spec.transistor_count


# ---------------------------------------------------------------------------
# operations


def compress42(spec, x1, x2, x3, x4, cin):
    for b in (x1, x2, x3, x4, cin):
        if b not in (0, 1):
            raise ValueError(f"compressor inputs must be bits, got {b!r}")
    s, c, co = spec.table[entry_index(x1, x2, x3, x4, cin)]
    return int(s), int(c), int(co)


def popcount(spec, bits):
    """Count set bits of up to 64 inputs with a compressor tree.

    ``bits`` may be a single bit sequence or a (batch, n) array.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.shape[-1]
    if n > 64:
        raise WidthExceeded(f"popcount supports at most 64 bits, got {n}")
    if n == 0:
        return 0 if bits.ndim == 1 else np.zeros(bits.shape[0], dtype=np.int64)
    tree = tree_for((0,) * n)
    out = tree.evaluate(spec, bits)
    return int(out) if bits.ndim == 1 else out


def accumulate_width(width, count):
    return width + math.ceil(math.log2(count)) if count > 1 else width


def accumulate(spec, addends, width):
    """Multi-operand addition of unsigned ``width``-bit addends.

    Output is taken modulo ``2**(width + ceil(log2(count)))`` which holds
    every exact sum.  Accepts one addend sequence or a (batch, count) array.
    """
    arr = np.asarray(addends, dtype=object if width > 62 else np.int64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    count = arr.shape[1]
    if count == 0:
        return 0 if single else np.zeros(arr.shape[0], dtype=np.int64)
    if np.any(arr < 0) or np.any(arr >= (1 << width)):
        raise WidthExceeded(f"addends must be representable in {width} unsigned bits")
    columns = np.tile(np.arange(width), count)
    tree = tree_for(columns, accumulate_width(width, count))
    bits = int_to_bits(arr.reshape(-1), width).reshape(arr.shape[0], count * width)
    out = tree.evaluate(spec, bits)
    return int(out[0]) if single else out


def int_to_bits(values, width):
    """Unsigned integers -> (n, width) LSB-first bits (values taken mod 2**width)."""
    values = np.asarray(values)
    if width <= 63 and values.dtype != object:
        v = values.astype(np.int64)
        return ((v[:, None] >> np.arange(width, dtype=np.int64)) & 1).astype(np.uint8)
    if width <= 64 and values.dtype != object:
        v = values.astype(np.uint64)
        return ((v[:, None] >> np.arange(width, dtype=np.uint64)) & np.uint64(1)).astype(np.uint8)
    out = np.empty((len(values), width), dtype=np.uint8)
    for i, x in enumerate(values):
        x = int(x) % (1 << width)
        for j in range(width):
            out[i, j] = (x >> j) & 1
    return out


# ---------------------------------------------------------------------------
# error metrics


@dataclass
class ErrorMetrics:
    error_rate: float
    nmed: float
    mred: float
    max_error: int
    spec: str = ""
    workload: str = ""
    width: int = 0
    count: int = 0
    policy: str = ""
    seed: int | None = None
    samples: int = 0

    def as_tuple(self):
        return (self.error_rate, self.nmed, self.mred, self.max_error)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    CSV_FIELDS = ("spec", "workload", "width", "count", "policy", "seed", "samples",
                  "error_rate", "nmed", "mred", "max_error")

    def to_csv_row(self):
        d = self.to_dict()
        return ",".join("" if d[k] is None else repr(d[k]) if isinstance(d[k], float) else str(d[k]) for k in self.CSV_FIELDS)


def parse_policy(policy):
    """'exhaustive' or 'sampled:N:SEED' (also accepts tuples) -> (kind, n, seed)."""
    if isinstance(policy, tuple):
        kind = policy[0]
        if kind == "exhaustive":
            return ("exhaustive", None, None)
        return ("sampled", int(policy[1]), int(policy[2]) if len(policy) > 2 else 0)
    parts = str(policy).split(":")
    if parts[0] == "exhaustive" and len(parts) == 1:
        return ("exhaustive", None, None)
    if parts[0] == "sampled" and len(parts) in (2, 3):
        return ("sampled", int(parts[1]), int(parts[2]) if len(parts) == 3 else 0)
    raise ValueError(f"unknown policy {policy!r}; use 'exhaustive' or 'sampled:N:SEED'")


EXHAUSTIVE_LIMIT = 1 << 24
WORKLOADS = ("mac", "accumulate", "compressor")


def _workload_inputs(workload, width, count, kind, n, seed):
    """Operand samples for a workload: (operands array, input bits)."""
    if workload == "compressor":
        space_bits = 5
    elif workload == "accumulate":
        space_bits = width * count
    else:
        space_bits = 2 * width * count
    if kind == "exhaustive":
        if space_bits > 24:
            raise SpaceTooLarge(f"exhaustive enumeration of 2**{space_bits} inputs exceeds 2**24; use a sampled policy")
        flat = np.arange(1 << space_bits, dtype=np.int64)
        return (flat[:, None] >> np.arange(space_bits, dtype=np.int64)) & 1
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=(n, space_bits), dtype=np.int64)


def _compose(bits, width, count):
    """(n, count*width) bits -> (n, count) unsigned operands."""
    w = bits.reshape(bits.shape[0], count, width)
    return (w << np.arange(width, dtype=np.int64)).sum(axis=2)


def _exact_and_approx(spec, workload, width, count, bits):
    if workload == "compressor":
        x = bits.astype(np.uint8)
        idx = (x[:, 4] << 4) | (x[:, 3] << 3) | (x[:, 2] << 2) | (x[:, 1] << 1) | x[:, 0]
        exact = x.sum(axis=1).astype(np.int64)
        approx = spec.values()[idx]
        return exact, approx, 5
    if workload == "accumulate":
        addends = _compose(bits, width, count)
        exact = addends.sum(axis=1)
        approx = np.asarray(accumulate(spec, addends, width), dtype=np.int64)
        return exact, approx, count * ((1 << width) - 1)
    from .mac import PrecisionMode, mac_batch
    half = width * count
    a = _compose(bits[:, :half], width, count)
    w = _compose(bits[:, half:], width, count)
    mode = PrecisionMode(width, signedness="unsigned")
    exact = (a * w).sum(axis=1)
    approx = np.asarray(mac_batch(a, w, mode, spec).values, dtype=np.int64)
    return exact, approx, count * ((1 << width) - 1) ** 2


def error_metrics(spec, width=8, addend_count=1, policy="exhaustive", workload="mac", chunk=1 << 16):
    """Error rate, NMED, MRED and max error distance of ``spec``.

    Workloads:

    * ``"mac"`` - unsigned ``width``-bit dot products of ``addend_count``
      terms, partial products reduced by the tree (how the macro uses it);
    * ``"accumulate"`` - ``addend_count`` uniform ``width``-bit addends;
    * ``"compressor"`` - a single compressor over its 32 input entries.

    NMED divides the mean error distance by the largest exact output of the
    configured workload; MRED divides each distance by ``max(exact, 1)``.
    """
    if workload not in WORKLOADS:
        raise ValueError(f"workload must be one of {WORKLOADS}")
    if width < 1 or addend_count < 1:
        raise ValueError("width and addend_count must be positive")
    kind, n, seed = parse_policy(policy)
    bits = _workload_inputs(workload, width, addend_count, kind, n, seed)
    total = bits.shape[0]
    errors = 0
    abs_sum = 0
    rel_sum = 0.0
    max_err = 0
    max_out = 1
    for i in range(0, total, chunk):
        exact, approx, max_out = _exact_and_approx(spec, workload, width, addend_count, bits[i:i + chunk])
        ed = np.abs(approx - exact)
        errors += int(np.count_nonzero(ed))
        abs_sum += int(ed.sum())
        rel_sum += float((ed / np.maximum(exact, 1)).sum())
        if ed.size:
            max_err = max(max_err, int(ed.max()))
    return ErrorMetrics(
        error_rate=errors / total,
        nmed=abs_sum / total / max_out,
        mred=rel_sum / total,
        max_error=max_err,
        spec=spec.label,
        workload=workload,
        width=width,
        count=addend_count,
        policy="exhaustive" if kind == "exhaustive" else f"sampled:{n}:{seed}",
        seed=seed,
        samples=total,
    )


# ---------------------------------------------------------------------------
# approximate spec search

REFERENCE_WORKLOAD = dict(width=8, addend_count=1, policy="exhaustive", workload="mac")


def stage1_candidates(base=None):
    """Single-minterm removals from the stage-1 (cout) logic of the exact spec."""
    base = base or exact_spec()
    out = []
    for x in range(16):
        idx = x << 1
        if base.table[idx, 2] == 1:
            bits = "".join(map(str, entry_bits(idx)[:4]))
            out.append(base.with_flipped(idx, "cout", label=f"cout-drop-{bits}"))
    return out


def search_approximate_spec(transistors=22, **workload):
    """Pick the stage-1 simplification with the lowest error on the reference workload.

    Candidates that produce no error at all on the workload are skipped;
    ties are broken by MRED, then NMED, then label.
    """
    workload = {**REFERENCE_WORKLOAD, **workload}
    scored = []
    for cand in stage1_candidates():
        m = error_metrics(cand, **workload)
        if m.error_rate > 0:
            scored.append(((m.error_rate, m.mred, m.nmed, cand.label), cand))
    (_, best) = min(scored, key=lambda t: t[0])
    return CompressorSpec(best.table, transistors, f"c22t-approx ({best.label})")
