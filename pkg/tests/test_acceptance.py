"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line that the conftest hook prints in the
terminal summary, then asserts.
"""

import math
import time
from importlib import resources

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE
from fermisim import perf
from fermisim.cam_lut import FUNCTIONS, build_lut, lut_lookup
from fermisim.cell_array import CellArray
from fermisim.compressor import (
    accumulate,
    approximate_spec,
    entry_bits,
    entry_index,
    error_metrics,
    exact_spec,
    popcount,
)
from fermisim.mac import SUPPORTED_BITS, PrecisionMode, dot_batch
from fermisim.nn_mapper import Model, host_reference, infer, load_eval_set, quantize_model
from fermisim.numformats import Fp4, Posit4

DATA = resources.files("fermisim") / "data" / "digits_mlp"


def record(k, ok, text):
    ACCEPTANCE[k] = (bool(ok), text)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {text}")
    assert ok, text


# random states hold invalid ternary pairs; those rows must simply mismatch
@pytest.mark.filterwarnings("ignore::fermisim.cell_array.InvalidTernaryEncodingWarning")
def test_criterion_1_table_conformance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    states = 10_000
    bad = 0
    arr = CellArray(4, 4)
    for _ in range(states):
        m = rng.integers(0, 2, (4, 4))
        arr.load(m)
        rows = m.tolist()
        r, c = rng.integers(0, 4, 2)
        bad += arr.read_row(r).tolist() != rows[r]
        bad += arr.read_column(c).tolist() != [row[c] for row in rows]
        key = rng.integers(0, 2, 4).tolist()
        bad += arr.bcam_search(key).tolist() != oracles.bcam_match(rows, key)
        tkey = "".join(rng.choice(list("01X"), 2))
        bad += arr.tcam_search(tkey).tolist() != oracles.tcam_match(rows, tkey)
        a, b = rng.choice(4, 2, replace=False)
        got = arr.pim_boolean(a, b)
        want = oracles.pim_boolean(rows[a], rows[b])
        bad += any(got[k].tolist() != want[k] for k in want)
        op = rng.integers(0, 2, 4).tolist()
        bad += arr.pim_multiply_row(r, op).tolist() != oracles.xnor(rows[r], op)
        bad += arr.transpose_read().tolist() != [list(col) for col in zip(*rows)]

    # exhaustive BCAM: all 2**16 4x4 states stacked into one array
    states_all = np.arange(1 << 16)
    cells = (states_all[:, None] >> np.arange(16)) & 1
    big = CellArray(1 << 18, 4)
    big.load(cells.reshape(-1, 4))
    stored = cells.reshape(-1, 4)
    for k in range(16):
        key = [(k >> i) & 1 for i in range(4)]
        want = np.all(stored == key, axis=1).astype(np.uint8)
        bad += int(np.count_nonzero(big.bcam_search(key) != want))
    dt = time.perf_counter() - t0
    record(1, bad == 0 and dt < 10,
           f"4x4 modes over {states} random states + exhaustive BCAM over 2^16 states: "
           f"{bad} mismatches, {dt:.2f} s (< 10 s)")


def test_criterion_2_exact_compressor():
    t0 = time.perf_counter()
    spec = exact_spec()
    bad = 0
    for i in range(32):
        s, c, co = spec.table[i]
        bad += int(s) + 2 * (int(c) + int(co)) != sum(entry_bits(i))
        assert entry_index(*entry_bits(i)) == i
    rng = np.random.default_rng(2)
    n = 1_000_000
    for start in range(0, n, 250_000):
        bits = rng.integers(0, 2, (250_000, 64), dtype=np.uint8)
        bad += int(np.count_nonzero(popcount(spec, bits) != bits.sum(axis=1)))
        addends = rng.integers(0, 256, (250_000, 8))
        bad += int(np.count_nonzero(accumulate(spec, addends, 8) != addends.sum(axis=1)))
    dt = time.perf_counter() - t0
    record(2, bad == 0 and dt < 30,
           f"32 entries, 1e6 64-bit popcounts, 1e6 8-addend 8-bit sums: {bad} mismatches, {dt:.2f} s (< 30 s)")


def test_criterion_3_mac_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    bad = 0
    lane_law = True
    for bits in SUPPORTED_BITS:
        mode = PrecisionMode(bits)
        lane_law &= mode.lanes * bits * bits == 4096
        length = min(mode.lanes, 16)
        a = rng.integers(mode.lo, mode.hi + 1, (10_000, length), dtype=np.int64)
        w = rng.integers(mode.lo, mode.hi + 1, (10_000, length), dtype=np.int64)
        got = dot_batch(a, w, mode, exact_spec()).values
        want = [oracles.dot(x, y) for x, y in zip(a.tolist(), w.tolist())]
        bad += sum(int(g) != v for g, v in zip(got, want))
    dt = time.perf_counter() - t0
    record(3, bad == 0 and lane_law and dt < 60,
           f"1e4 dot products in each of int1..int64: {bad} mismatches, lanes x n^2 = 4096 "
           f"{'holds' if lane_law else 'fails'}, {dt:.2f} s (< 60 s)")


def test_criterion_4_error_metrics():
    approx = approximate_spec()
    a = error_metrics(approx, 8, policy="sampled:50000:11")
    b = error_metrics(approx, 8, policy="sampled:50000:11")
    full = error_metrics(approx, 8)
    exact = error_metrics(exact_spec(), 8).as_tuple()[:3]
    fault = exact_spec().with_flipped(entry_index(1, 0, 1, 0, 1), "sum")
    one = error_metrics(fault, workload="compressor").error_rate
    ok = a == b and exact == (0, 0, 0) and 0 < full.error_rate < 0.1 and one == 1 / 32
    record(4, ok,
           f"deterministic under seed: {a == b}; exact {exact}; approx width-8 error rate "
           f"{full.error_rate:.4f} (NMED {full.nmed:.3g}, MRED {full.mred:.3g}); "
           f"single-fault error rate {one} (1/32)")


def test_criterion_5_codecs():
    t0 = time.perf_counter()
    fp4, failures = Fp4(), []
    for c in range(16):
        if fp4.decode(c) != oracles.fp4_value(c):
            failures.append(f"fp4 decode {c}")
        if fp4.encode(fp4.decode(c)) != (0 if c == 8 else c):
            failures.append(f"fp4 roundtrip {c}")
    pos = [fp4.decode(c) for c in range(8)]
    if pos != sorted(pos) or len(set(pos)) != 8:
        failures.append("fp4 monotone")
    for es in (0, 1, 2):
        p = Posit4(es)
        for c in range(16):
            v, o = p.decode(c), oracles.posit4_value(c, es)
            if not (v == o or (math.isnan(v) and math.isnan(o))):
                failures.append(f"posit4:{es} decode {c}")
            if p.encode(v) != c:
                failures.append(f"posit4:{es} roundtrip {c}")
        order = sorted((c for c in range(16) if c != 8), key=lambda c: c - 16 if c & 8 else c)
        vals = [p.decode(c) for c in order]
        if vals != sorted(vals) or len(set(vals)) != 15:
            failures.append(f"posit4:{es} monotone")
    for codec in (fp4, Posit4(0), Posit4(1), Posit4(2)):
        for fn in ("sigmoid", "tanh"):
            table = build_lut(fn, codec)
            for key in range(16):
                x = codec.decode(key)
                out = codec.decode(lut_lookup(table, key))
                if math.isnan(x):
                    continue
                y = FUNCTIONS[fn](x)
                if abs(out - y) > codec.half_spacing(y) + 1e-12:
                    failures.append(f"{codec.name} {fn} key {key}")
    dt = time.perf_counter() - t0
    record(5, not failures and dt < 1,
           f"FP4 and Posit4 (es 0..2) exhaustive decode/encode/monotone, LUT within half spacing: "
           f"{len(failures)} failures, {dt:.3f} s (< 1 s)")


def test_criterion_6_perf_headline():
    rep = perf.report(perf.sustained_tally(1))
    figs = (f"{rep.tops:.3g}", f"{rep.tops_per_watt:.3g}", f"{rep.tops_per_mm2:.3g}")
    e_pim = perf.energy_pim(4096) * 1e-3
    e_cam = perf.energy_cam(1, 64)
    ok = (figs == ("1.93", "364", "4.58") and round(e_pim, 2) == 72.29
          and e_cam == pytest.approx(35.2))
    record(6, ok,
           f"{figs[0]} TOPS, {figs[1]} TOPS/W, {figs[2]} TOPS/mm2; "
           f"PIM pass {e_pim:.2f} pJ, CAM search {e_cam:.1f} fJ")


def test_criterion_7_end_to_end_qor():
    t0 = time.perf_counter()
    model = Model.load(DATA / "model.json")
    x, y = load_eval_set(DATA / "eval.csv")
    calib, _ = load_eval_set(DATA / "calibration.csv")
    qm = quantize_model(model, calib, prune_fraction=0.40)
    exact = infer(qm, x, exact_spec(), y, model)
    identical = np.array_equal(exact.outputs, host_reference(qm, x))
    approx = infer(qm, x, approximate_spec(), y, model)
    dt = time.perf_counter() - t0
    q = approx.qor
    record(7, identical and q.qor >= 0.95 and dt < 300,
           f"digits MLP INT4, {q.sparsity:.0%} pruned: exact run bit-identical to host oracle: {identical}; "
           f"approx QoR {q.qor:.4f} (>= 0.95, accuracy {q.quantized_accuracy:.4f} vs float "
           f"{q.float_accuracy:.4f}), {dt:.1f} s (< 300 s)")


def test_criterion_8_transpose():
    rng = np.random.default_rng(8)
    bad = 0
    arr = CellArray(64, 64)
    for _ in range(1000):
        m = rng.integers(0, 2, (64, 64), dtype=np.uint8)
        for r in range(64):
            arr.write_row(r, m[r])
        cols = np.array([arr.read_column(c) for c in range(64)])
        bad += int(not np.array_equal(cols, m.T))
    record(8, bad == 0, f"1e3 random 64x64 write-row/read-column transposes: {bad} mismatches")
