import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fermisim.mac import OpTally, PrecisionMode, mac_batch
from fermisim.perf import (
    EnergyParams,
    VoltageOutOfRange,
    cycles_per_pass,
    dvfs,
    energy_cam,
    energy_pim,
    load_params,
    report,
    sustained_tally,
    throughput,
)


def test_energy_units():
    assert energy_pim(4096) == pytest.approx(72294.4)  # fJ = 72.29 pJ
    assert energy_cam(1, 64) == pytest.approx(35.2)
    assert energy_pim(0) == 0


def test_headline_figures():
    r = report(sustained_tally(1))
    assert f"{r.tops:.3g}" == "1.93"
    assert f"{r.tops_per_watt:.3g}" == "364"
    assert f"{r.tops_per_mm2:.3g}" == "4.58"
    assert r.f_mhz == 350.0


def test_throughput_matches_report():
    for bits in (1, 2, 4, 8):
        assert throughput(bits) == pytest.approx(report(sustained_tally(bits)).tops)


def test_throughput_falls_with_precision():
    t = [throughput(b) for b in (1, 2, 4, 8, 16, 32, 64)]
    assert t == sorted(t, reverse=True)


def test_cycles_per_pass_scaling():
    assert cycles_per_pass(1) == pytest.approx(1.486)
    assert cycles_per_pass(8) == pytest.approx(1.486 * 68 / 2)


def test_dvfs_nominal_and_limits():
    p = dvfs(0.9)
    assert p["f_mhz"] == 350.0 and p["energy_scale"] == 1.0
    assert dvfs(1.2)["f_mhz"] == pytest.approx(350 * 1.2 / 0.9)
    with pytest.raises(VoltageOutOfRange):
        dvfs(0.7)
    with pytest.raises(VoltageOutOfRange):
        report(sustained_tally(), v=1.3)


@given(st.floats(0.8, 1.2))
def test_dvfs_scaling(v):
    r = report(sustained_tally(1, 1000), v=v)
    base = report(sustained_tally(1, 1000))
    ratio = v / 0.9
    assert r.tops == pytest.approx(base.tops * ratio)
    assert r.energy_pj == pytest.approx(base.energy_pj * ratio ** 2)
    assert r.tops_per_watt == pytest.approx(base.tops_per_watt / ratio ** 2)


@given(st.integers(1, 10 ** 6), st.sampled_from([1, 2, 4, 8, 16]))
def test_power_identity(passes, bits):
    r = report(sustained_tally(bits, passes))
    assert r.tops_per_watt * r.power_mw * 1e-3 == pytest.approx(r.tops)


def test_energy_is_linear_in_tally():
    a = OpTally(ops=100, pim_bit_ops=1000, cam_search_bits=64, passes={1: 1})
    r1, r2 = report(a), report(a + a)
    assert r2.energy_pj == pytest.approx(2 * r1.energy_pj)


def test_report_from_mac_tally():
    mode = PrecisionMode(4)
    a = np.ones((10, 256), dtype=np.int64)
    r = report(mac_batch(a, a, mode).tally())
    assert r.op_counts["ops"] == 2 * 10 * 256
    assert r.op_counts["passes"] == {"4": 10}
    assert r.latency_us == pytest.approx(10 * cycles_per_pass(4) / 350)


def test_empty_tally():
    r = report(OpTally())
    assert r.tops == 0 and r.energy_pj == 0


def test_params_validation_and_overrides(tmp_path):
    with pytest.raises(ValueError):
        EnergyParams(e_pim_fj_per_bit=0)
    with pytest.raises(KeyError):
        EnergyParams().with_overrides(bogus=1)
    (tmp_path / "p.cfg").write_text("# doubled energy\ne_pim_fj_per_bit = 35.3\n")
    p = load_params(tmp_path / "p.cfg")
    assert energy_pim(1, p) == pytest.approx(35.3)
    assert report(sustained_tally(), p).tops_per_watt == pytest.approx(364.004 / 2, rel=1e-4)


def test_serialisation():
    r = report(sustained_tally(8))
    d = json.loads(r.to_json())
    assert d["f_mhz"] == 350.0
    header, values = r.to_csv().strip().splitlines()
    assert "tops_per_watt" in header.split(",")
    assert len(header.split(",")) == len(values.split(","))
    assert not math.isnan(float(values.split(",")[0]))


def test_raw_cell_area():
    assert EnergyParams().cell_array_area_mm2 == pytest.approx(4096 * 2.63e-6)
