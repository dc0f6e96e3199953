import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from fermisim.compressor import (
    CompressorSpec,
    IncompleteSpec,
    InvalidSpec,
    SpaceTooLarge,
    WidthExceeded,
    accumulate,
    approximate_spec,
    build_tree,
    compress42,
    entry_bits,
    entry_index,
    error_metrics,
    exact_spec,
    int_to_bits,
    parse_policy,
    popcount,
    search_approximate_spec,
    stage1_candidates,
    transistor_count,
    tree_for,
)


# -- truth tables -----------------------------------------------------------

def test_exact_spec_identity_all_entries():
    spec = exact_spec()
    for bits in itertools.product((0, 1), repeat=5):
        s, c, co = compress42(spec, *bits)
        assert s + 2 * (c + co) == sum(bits)


def test_exact_cout_independent_of_cin():
    spec = exact_spec()
    for x in itertools.product((0, 1), repeat=4):
        assert compress42(spec, *x, 0)[2] == compress42(spec, *x, 1)[2]


def test_entry_index_roundtrip():
    for i in range(32):
        assert entry_index(*entry_bits(i)) == i
    assert entry_index(1, 0, 0, 0, 0) == 16


def test_all_ones():
    assert compress42(exact_spec(), 1, 1, 1, 1, 1) == (1, 1, 1)


def test_cout_depending_on_cin_rejected():
    table = exact_spec().table.copy()
    table[1, 2] ^= 1
    with pytest.raises(InvalidSpec):
        CompressorSpec(table)


def test_wrong_shape_rejected():
    with pytest.raises(IncompleteSpec):
        CompressorSpec(np.zeros((31, 3)))


def test_non_bit_inputs_rejected():
    with pytest.raises(ValueError):
        compress42(exact_spec(), 2, 0, 0, 0, 0)


def test_file_roundtrip(tmp_path):
    spec = approximate_spec()
    spec.save(tmp_path / "a.ctt")
    back = CompressorSpec.load(tmp_path / "a.ctt")
    assert back == spec
    assert back.label == spec.label
    assert back.transistor_count == 22


def test_file_missing_entry():
    text = exact_spec().dumps().splitlines()
    with pytest.raises(IncompleteSpec):
        CompressorSpec.loads("\n".join(text[:-1]))


def test_file_duplicate_and_garbage():
    text = exact_spec().dumps()
    with pytest.raises(InvalidSpec):
        CompressorSpec.loads(text + "0 0 0 0 0 : 0 0 0\n")
    with pytest.raises(InvalidSpec):
        CompressorSpec.loads(text.replace("1 1 1 1 1 : 1 1 1", "1 1 1 1 1 : 1 x 1"))


def test_shipped_approximate_spec():
    spec = approximate_spec()
    assert spec.transistor_count == 22
    assert not spec.is_exact
    # the only inexact entries: x1..x4 all ones, cout dropped (value short by 2)
    bad = np.flatnonzero(spec.errors())
    assert [entry_bits(i)[:4] for i in bad] == [(1, 1, 1, 1), (1, 1, 1, 1)]
    assert set(spec.errors()[bad]) == {-2}


def test_search_reproduces_shipped_spec():
    assert search_approximate_spec() == approximate_spec()


def test_stage1_candidates_each_drop_one_minterm():
    exact = exact_spec()
    for cand in stage1_candidates():
        diff = np.flatnonzero(cand.table[:, 2] != exact.table[:, 2])
        assert len(diff) == 2  # the two cin halves of one entry


# -- trees ------------------------------------------------------------------

@given(st.lists(st.integers(0, 1), min_size=0, max_size=64))
def test_popcount_exact(bits):
    assert popcount(exact_spec(), bits) == oracles.popcount(bits)


def test_popcount_batch():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, (500, 64))
    assert np.array_equal(popcount(exact_spec(), bits), bits.sum(axis=1))


def test_popcount_limits():
    assert popcount(exact_spec(), []) == 0
    assert popcount(exact_spec(), [1] * 64) == 64
    with pytest.raises(WidthExceeded):
        popcount(exact_spec(), [1] * 65)


@given(st.integers(1, 12), st.lists(st.integers(0, 2 ** 12 - 1), min_size=1, max_size=20))
def test_accumulate_exact(width, values):
    values = [v % (1 << width) for v in values]
    assert accumulate(exact_spec(), values, width) == sum(values)


def test_accumulate_rejects_wide_addends():
    with pytest.raises(WidthExceeded):
        accumulate(exact_spec(), [256], 8)


@given(st.lists(st.integers(0, 6), min_size=1, max_size=40), st.integers(0, 2 ** 32 - 1))
def test_tree_weighted_sum(columns, seed):
    tree = build_tree(columns)
    bits = np.random.default_rng(seed).integers(0, 2, (16, len(columns)))
    expect = bits @ (1 << np.array(columns))
    assert np.array_equal(tree.evaluate(exact_spec(), bits), expect)


@given(st.lists(st.integers(0, 5), min_size=1, max_size=40), st.integers(0, 2 ** 32 - 1))
def test_error_bounded_by_compressor_count(columns, seed):
    tree = build_tree(columns)
    spec = approximate_spec()
    bits = np.random.default_rng(seed).integers(0, 2, (16, len(columns)))
    exact = bits @ (1 << np.array(columns))
    err = np.abs(tree.evaluate(spec, bits) - exact)
    assert np.all(err <= tree.error_bound(spec))


def test_tree_depth_logarithmic():
    depths = [tree_for((0,) * n).depth for n in (4, 16, 64, 256)]
    assert depths == sorted(depths)
    assert depths[-1] <= 2 * np.log2(256)


def test_transistor_count():
    tree = tree_for((0,) * 64)
    assert transistor_count(tree, approximate_spec()) == tree.n_compressors * 22
    assert transistor_count(tree, exact_spec()) == tree.n_compressors * 56


def test_exact_from_restricts_approximation():
    rng = np.random.default_rng(3)
    columns = np.repeat(np.arange(6), 8)
    tree = tree_for(tuple(columns))
    bits = rng.integers(0, 2, (200, len(columns)))
    exact = bits @ (1 << columns)
    assert np.array_equal(tree.evaluate(approximate_spec(), bits, exact_from=0), exact)
    low = tree.evaluate(approximate_spec(), bits, exact_from=2)
    full = tree.evaluate(approximate_spec(), bits)
    assert np.abs(low - exact).mean() < np.abs(full - exact).mean()


def test_int_to_bits_wide():
    assert int_to_bits(np.array([2 ** 70 + 5], dtype=object), 72)[0, [0, 2, 70]].tolist() == [1, 1, 1]


# -- error metrics ----------------------------------------------------------

def test_exact_spec_has_no_error():
    m = error_metrics(exact_spec(), 8)
    assert m.as_tuple()[:3] == (0, 0, 0)
    assert m.max_error == 0


def test_single_fault_error_rate_is_one_in_32():
    spec = exact_spec().with_flipped(entry_index(1, 0, 1, 0, 1), "sum")
    m = error_metrics(spec, workload="compressor")
    assert m.error_rate == 1 / 32
    assert m.max_error == 1
    assert m.samples == 32


def test_single_cout_fault_hits_two_entries():
    spec = exact_spec().with_flipped(entry_index(1, 1, 0, 0, 0), "cout")
    assert error_metrics(spec, workload="compressor").error_rate == 2 / 32


def test_sampled_is_deterministic():
    a = error_metrics(approximate_spec(), 8, policy="sampled:20000:7")
    b = error_metrics(approximate_spec(), 8, policy="sampled:20000:7")
    c = error_metrics(approximate_spec(), 8, policy="sampled:20000:8")
    assert a == b
    assert a.as_tuple() != c.as_tuple()


def test_sampled_close_to_exhaustive():
    full = error_metrics(approximate_spec(), 8)
    sampled = error_metrics(approximate_spec(), 8, policy="sampled:50000:1")
    assert abs(full.error_rate - sampled.error_rate) < 0.01


def test_approximate_metrics_in_range():
    m = error_metrics(approximate_spec(), 8)
    assert 0 < m.error_rate < 0.10
    assert 0 < m.nmed < 0.01
    assert 0 < m.mred < 0.01


def test_accumulate_workload_manual():
    # width 1, three addends: only full adders, so no compressor error
    m = error_metrics(approximate_spec(), 1, 3, workload="accumulate")
    assert m.error_rate == 0


def test_accumulate_workload_brute_force():
    # 4 one-bit addends feed exactly one compressor: error only on 1111
    m = error_metrics(approximate_spec(), 1, 4, workload="accumulate")
    assert m.error_rate == 1 / 16
    assert m.max_error == 2


def test_space_too_large():
    with pytest.raises(SpaceTooLarge):
        error_metrics(exact_spec(), 16)


def test_policy_parsing():
    assert parse_policy("exhaustive") == ("exhaustive", None, None)
    assert parse_policy("sampled:100:3") == ("sampled", 100, 3)
    with pytest.raises(ValueError):
        parse_policy("random")


def test_metrics_serialisation():
    m = error_metrics(approximate_spec(), 4)
    d = json.loads(m.to_json())
    assert d["error_rate"] == m.error_rate
    assert len(m.to_csv_row().split(",")) == len(m.CSV_FIELDS)
