import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from fermisim.cell_array import (
    CellArray,
    ControlVector,
    IndexOutOfRange,
    InvalidControlPattern,
    InvalidTernaryEncoding,
    InvalidTernaryEncodingWarning,
    LengthMismatch,
    LineState,
    Mode,
    SameRow,
    encode_ternary,
    ml_discharge,
    sense_xnor,
)

rng = np.random.default_rng(1234)


def random_array(rows=8, cols=8, seed=None):
    r = np.random.default_rng(seed)
    m = r.integers(0, 2, (rows, cols), dtype=np.uint8)
    return CellArray(rows, cols).load(m), m


# -- control patterns -------------------------------------------------------

class TestControlPatterns:
    def test_write_pattern(self):
        v = ControlVector(wwl=1, wbl=1, wblb=0, rwl=0)
        assert v.matching_modes() == {Mode.WRITE}

    def test_column_read_pattern(self):
        v = ControlVector(wwl=0, sl_rbl=1, rblb_slb=0, rwl=0, ml_hbl=1)
        assert Mode.READ_COLUMN in v.matching_modes()

    def test_row_read_and_boolean_share_pattern(self):
        v = ControlVector(wwl=0, sl_rbl=1, rblb_slb=1, rwl=1, ml_hbl=0)
        assert v.matching_modes() == {Mode.READ_ROW, Mode.PIM_BOOLEAN}

    def test_hold_pattern(self):
        v = ControlVector(wwl=0, rwl=0, ml_hbl=1)
        assert v.matching_modes() == {Mode.IDLE}

    def test_search_patterns(self):
        for sl in (0, 1):
            v = ControlVector(wwl=0, sl_rbl=sl, rblb_slb=1 - sl, rwl=0, ml_hbl=1)
            assert {Mode.BCAM, Mode.TCAM, Mode.PIM_MULTIPLY} <= v.matching_modes()

    def test_masked_search_is_not_a_multiply(self):
        v = ControlVector(wwl=0, sl_rbl=1, rblb_slb=1, rwl=0, ml_hbl=1)
        assert Mode.PIM_MULTIPLY not in v.matching_modes()
        assert Mode.BCAM in v.matching_modes()

    def test_invalid_pattern_raises(self):
        with pytest.raises(InvalidControlPattern):
            ControlVector(wwl=1, wbl=1, wblb=1, rwl=0).check(Mode.WRITE)
        with pytest.raises(InvalidControlPattern):
            ControlVector(wwl=1, rwl=1).check(Mode.READ_ROW)

    def test_every_pattern_is_recognised_by_some_mode(self):
        # 3 states (0, 1, NC) on 7 lines: valid vectors map to at least one mode
        count = 0
        for code in range(3 ** 7):
            vals = []
            for _ in range(7):
                code, r = divmod(code, 3)
                vals.append(None if r == 2 else r)
            v = ControlVector(*vals)
            for m in v.matching_modes():
                v.check(m)
                count += 1
        assert count > 0


# -- line physics -----------------------------------------------------------

def test_ml_discharge_truth_table():
    for stored in (0, 1):
        for sl in (0, 1):
            for slb in (0, 1):
                expect = int((stored == 1 and sl == 0) or (stored == 0 and slb == 0))
                assert ml_discharge(stored, sl, slb) == expect


def test_sense_xnor_is_xnor():
    for s in (0, 1):
        for o in (0, 1):
            assert sense_xnor(s, o) == int(s == o)


# -- memory mode ------------------------------------------------------------

class TestMemory:
    def test_write_then_read_row(self):
        a = CellArray(4, 4)
        a.write_row(2, [1, 0, 1, 1])
        assert a.read_row(2).tolist() == [1, 0, 1, 1]
        assert a.read_row(0).tolist() == [0, 0, 0, 0]

    def test_read_is_non_destructive(self):
        a, m = random_array(seed=1)
        for r in range(8):
            a.read_row(r)
        for c in range(8):
            a.read_column(c)
        a.bcam_search(m[0])
        a.pim_boolean(0, 1)
        assert np.array_equal(a.storage, m)

    def test_read_row_lines(self):
        a = CellArray(4, 4).load(np.eye(4, dtype=np.uint8))
        a.read_row(1)
        assert a.last_lines["RBL"].tolist() == [1, -1, 1, 1]
        assert a.last_lines["RBLB"].tolist() == [-1, 1, -1, -1]

    def test_read_column(self):
        a = CellArray(4, 4).load(np.eye(4, dtype=np.uint8))
        assert a.read_column(3).tolist() == [0, 0, 0, 1]
        assert a.last_lines["ML"][3] == LineState.HIGH

    def test_transpose_identity(self):
        a = CellArray(64, 64).load(np.eye(64, dtype=np.uint8))
        assert np.array_equal(a.transpose_read(), np.eye(64))

    @given(st.integers(0, 2 ** 32 - 1))
    def test_transpose_random(self, seed):
        a, m = random_array(16, 8, seed)
        assert np.array_equal(a.transpose_read(), m.T)

    def test_index_errors(self):
        a = CellArray(4, 4)
        with pytest.raises(IndexOutOfRange):
            a.read_row(4)
        with pytest.raises(IndexOutOfRange):
            a.read_column(-1)
        with pytest.raises(IndexOutOfRange):
            a.write_row(9, [0, 0, 0, 0])

    def test_length_mismatch(self):
        a = CellArray(4, 4)
        with pytest.raises(LengthMismatch):
            a.write_row(0, [1, 0, 1])
        with pytest.raises(LengthMismatch):
            a.bcam_search([1, 0])

    def test_non_binary_data_rejected(self):
        with pytest.raises(ValueError):
            CellArray(4, 4).write_row(0, [0, 2, 0, 1])

    def test_geometry_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            CellArray(6, 4)

    def test_storage_is_read_only(self):
        a = CellArray(4, 4)
        with pytest.raises(ValueError):
            a.storage[0, 0] = 1

    def test_stats(self):
        a = CellArray(4, 4)
        a.write_row(0, [1, 1, 1, 1])
        a.read_row(0)
        a.bcam_search([1, 1, 1, 1])
        assert a.stats["writes"] == 1
        assert a.stats["row_reads"] == 1
        assert a.stats["cam_searches"] == 1
        assert a.stats["cam_search_bits"] == 16


# -- CAM mode ---------------------------------------------------------------

class TestBcam:
    def test_single_match(self):
        a = CellArray(4, 4).load([[1, 0, 1, 1], [0, 1, 1, 0], [1, 1, 1, 1], [0, 0, 0, 0]])
        assert a.bcam_search([1, 0, 1, 1]).tolist() == [1, 0, 0, 0]

    def test_duplicate_rows_both_match(self):
        a = CellArray(4, 4).load([[1, 0, 1, 1], [0, 1, 1, 0], [1, 0, 1, 1], [0, 0, 0, 0]])
        assert a.bcam_search([1, 0, 1, 1]).tolist() == [1, 0, 1, 0]

    @given(st.integers(0, 2 ** 32 - 1))
    def test_against_oracle(self, seed):
        a, m = random_array(8, 4, seed)
        key = np.random.default_rng(seed + 1).integers(0, 2, 4)
        assert a.bcam_search(key).tolist() == oracles.bcam_match(m.tolist(), key.tolist())

    def test_column_subset(self):
        a = CellArray(4, 8).load(np.array([[1, 0, 1, 1, 0, 0, 0, 0],
                                            [1, 0, 1, 1, 1, 1, 1, 1],
                                            [0, 0, 1, 1, 0, 0, 0, 0],
                                            [1, 0, 1, 0, 0, 0, 0, 0]]))
        assert a.bcam_search([1, 0, 1, 1], columns=slice(0, 4)).tolist() == [1, 1, 0, 0]

    def test_row_subset(self):
        a = CellArray(4, 4).load(np.ones((4, 4), dtype=np.uint8))
        assert a.bcam_search([1, 1, 1, 1], rows=[1, 3]).tolist() == [1, 1]


class TestTcam:
    def test_encode(self):
        assert encode_ternary([0, 1, "X"]).tolist() == [0, 0, 1, 1, 0, 1]

    def test_stored_x_matches_anything(self):
        a = CellArray(2, 4).load(np.array([encode_ternary("1X"), encode_ternary("10")]))
        assert a.tcam_search("10").tolist() == [1, 1]
        assert a.tcam_search("11").tolist() == [1, 0]

    def test_key_x_matches_anything(self):
        a = CellArray(2, 4).load(np.array([encode_ternary("10"), encode_ternary("01")]))
        assert a.tcam_search("XX").tolist() == [1, 1]
        assert a.tcam_search("X1").tolist() == [0, 1]

    def test_invalid_pair_warns_and_mismatches(self):
        a = CellArray(2, 4).load(np.array([[1, 0, 0, 0], encode_ternary("00")]))
        with pytest.warns(InvalidTernaryEncodingWarning):
            assert a.tcam_search("XX").tolist() == [0, 1]
        assert a.diagnostics

    def test_invalid_pair_strict(self):
        a = CellArray(2, 4).load(np.array([[1, 0, 0, 0], encode_ternary("00")]))
        with pytest.raises(InvalidTernaryEncoding):
            a.tcam_search("00", strict=True)

    @given(st.lists(st.sampled_from([0, 1, "X"]), min_size=16, max_size=16),
           st.lists(st.sampled_from(["0", "1", "X"]), min_size=2, max_size=2))
    def test_against_oracle(self, symbols, key):
        rows = [encode_ternary(symbols[i:i + 2]) for i in range(0, 16, 2)]
        a = CellArray(8, 4).load(np.array(rows))
        assert a.tcam_search("".join(key)).tolist() == oracles.tcam_match([r.tolist() for r in rows], key)

    def test_bad_key_length(self):
        with pytest.raises(LengthMismatch):
            CellArray(2, 4).tcam_search("101")


# -- PIM mode ---------------------------------------------------------------

class TestPim:
    def test_boolean_truth_table(self):
        a = CellArray(2, 4).load([[0, 0, 1, 1], [0, 1, 0, 1]])
        out = a.pim_boolean(0, 1)
        assert out["and"].tolist() == [0, 0, 0, 1]
        assert out["nor"].tolist() == [1, 0, 0, 0]
        assert out["xnor"].tolist() == [1, 0, 0, 1]

    def test_same_row_rejected(self):
        with pytest.raises(SameRow):
            CellArray(2, 4).pim_boolean(1, 1)

    @given(st.integers(0, 2 ** 32 - 1))
    def test_boolean_oracle(self, seed):
        a, m = random_array(4, 16, seed)
        out = a.pim_boolean(0, 3)
        ref = oracles.pim_boolean(m[0].tolist(), m[3].tolist())
        for k in ("and", "nor", "xnor"):
            assert out[k].tolist() == ref[k]

    @given(st.integers(0, 2 ** 32 - 1))
    def test_multiply_is_xnor(self, seed):
        a, m = random_array(4, 16, seed)
        op = np.random.default_rng(seed).integers(0, 2, 16)
        assert a.pim_multiply_row(2, op).tolist() == oracles.xnor(m[2].tolist(), op.tolist())


# -- files and traces -------------------------------------------------------

def test_text_roundtrip(tmp_path):
    a, m = random_array(8, 8, 7)
    a.save_text(tmp_path / "a.txt")
    b = CellArray.load_text(tmp_path / "a.txt")
    assert np.array_equal(b.storage, m)


def test_csv_roundtrip(tmp_path):
    a, m = random_array(8, 8, 8)
    a.save_csv(tmp_path / "a.csv")
    assert np.array_equal(CellArray.load_image(tmp_path / "a.csv").storage, m)


def test_ragged_text_rejected():
    with pytest.raises(LengthMismatch):
        CellArray.from_text("1010\n101\n")


def test_trace_records_every_operation():
    a = CellArray(2, 2, trace=True)
    a.write_row(0, [1, 0])
    a.read_row(0)
    a.bcam_search([1, 0])
    lines = a.trace_csv().strip().splitlines()
    assert lines[0] == "step,mode,inputs,outputs"
    assert [ln.split(",")[1] for ln in lines[1:]] == ["write", "read_row", "bcam"]
    assert lines[3].endswith(",10")


def test_load_equals_row_writes():
    m = rng.integers(0, 2, (8, 8), dtype=np.uint8)
    a = CellArray(8, 8, trace=True).load(m)
    b = CellArray(8, 8, trace=True)
    for r in range(8):
        b.write_row(r, m[r])
    assert np.array_equal(a.storage, b.storage)
    assert a.stats == b.stats
    assert a.trace_csv() == b.trace_csv()
