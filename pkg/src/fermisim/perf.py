"""Analytical energy / throughput / density model of the macro.

Energy is charged per logical bit operation (no data dependence).  Voltage
scaling assumes frequency linear in V and energy per operation quadratic
in V, both relative to the nominal point.

Three constants are calibrated so that an uninterrupted 1-bit workload
lands on the measured headline figures:

* ``cycles_per_mac_pass`` (1.486) turns the 4096 x 2 ops/cycle peak into
  1.93 TOPS at 350 MHz;
* ``pim_energy_factor`` (0.15565) is the fraction of the per-bit PIM
  energy charged per counted bit operation, giving 364 TOPS/W;
* ``macro_area_mm2`` (0.4214 = 1.93 / 4.58) is the effective macro area
  including periphery, giving 4.58 TOPS/mm2.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .mac import OpTally, PrecisionMode, pass_cycles

__all__ = [
    "VoltageOutOfRange",
    "EnergyParams",
    "PerfReport",
    "dvfs",
    "energy_pim",
    "energy_cam",
    "cycles_per_pass",
    "throughput",
    "report",
    "sustained_tally",
    "load_params",
]


class VoltageOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class EnergyParams:
    e_pim_fj_per_bit: float = 17.65
    e_cam_fj_per_search_bit: float = 0.55
    f_nominal_mhz: float = 350.0
    v_nominal: float = 0.9
    v_min: float = 0.8
    v_max: float = 1.2
    cycles_per_mac_pass: float = 1.486
    pim_energy_factor: float = 0.15565
    macro_area_mm2: float = 0.4214
    cell_area_um2: float = 2.63

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{f.name} must be strictly positive, got {v!r}")
        if not self.v_min <= self.v_nominal <= self.v_max:
            raise ValueError("v_nominal must lie inside [v_min, v_max]")

    @property
    def v_range(self):
        return (self.v_min, self.v_max)

    @property
    def cell_array_area_mm2(self):
        """Raw bit-cell area of a 64 x 64 array, without periphery."""
        return 4096 * self.cell_area_um2 * 1e-6

    def with_overrides(self, **kw):
        names = {f.name for f in fields(self)}
        unknown = set(kw) - names
        if unknown:
            raise KeyError(f"unknown energy parameters: {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in kw.items()})


def load_params(path, base=None):
    """Read ``key = value`` lines (``#`` comments) over the defaults."""
    overrides = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        overrides[key.strip()] = float(value)
    return (base or EnergyParams()).with_overrides(**overrides)


def dvfs(v, params=None):
    """Operating point at supply ``v``: {'v', 'f_mhz', 'energy_scale'}."""
    params = params or EnergyParams()
    if not params.v_min <= v <= params.v_max:
        raise VoltageOutOfRange(f"{v} V outside [{params.v_min}, {params.v_max}] V")
    ratio = v / params.v_nominal
    return {"v": v, "f_mhz": params.f_nominal_mhz * ratio, "energy_scale": ratio * ratio}


def _scale(params, v):
    return 1.0 if v is None else dvfs(v, params)["energy_scale"]


def energy_pim(bit_ops, params=None, v=None):
    """fJ for ``bit_ops`` PIM bit operations."""
    params = params or EnergyParams()
    if bit_ops < 0:
        raise ValueError("bit_ops must be non-negative")
    return bit_ops * params.e_pim_fj_per_bit * _scale(params, v)


def energy_cam(searches, bits_per_search, params=None, v=None):
    """fJ for ``searches`` CAM searches over ``bits_per_search`` cells each."""
    params = params or EnergyParams()
    if searches < 0 or bits_per_search < 0:
        raise ValueError("counts must be non-negative")
    return searches * bits_per_search * params.e_cam_fj_per_search_bit * _scale(params, v)


def cycles_per_pass(bits, params=None):
    """Calibrated cycles of one pass at ``bits`` precision.

    The 1-bit pass costs ``cycles_per_mac_pass``; wider modes scale it by
    the ratio of :func:`fermisim.mac.pass_cycles`.
    """
    params = params or EnergyParams()
    return params.cycles_per_mac_pass * pass_cycles(bits) / pass_cycles(1)


def _bits(mode):
    return mode.bits if isinstance(mode, PrecisionMode) else int(mode)


def throughput(mode, params=None, v=None):
    """Peak TOPS in ``mode``: lanes x 2 ops x f / cycles per pass."""
    params = params or EnergyParams()
    n = _bits(mode)
    lanes = 4096 // (n * n)
    f = params.f_nominal_mhz if v is None else dvfs(v, params)["f_mhz"]
    return lanes * 2 * f / cycles_per_pass(n, params) * 1e-6


@dataclass
class PerfReport:
    tops: float
    tops_per_watt: float
    tops_per_mm2: float
    energy_pj: float
    latency_us: float
    power_mw: float
    f_mhz: float
    voltage: float
    op_counts: dict

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        d = self.to_dict()
        flat = {k: v for k, v in d.items() if k != "op_counts"}
        flat.update({f"op_{k}": v for k, v in d["op_counts"].items() if not isinstance(v, dict)})
        flat.update({f"passes_{k}b": v for k, v in d["op_counts"].get("passes", {}).items()})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(flat))
        w.writerow([repr(v) if isinstance(v, float) else v for v in flat.values()])
        return buf.getvalue()


def sustained_tally(bits=1, passes=1_000_000):
    """Workload of ``passes`` back-to-back full passes at one precision."""
    lanes = 4096 // (bits * bits)
    return OpTally(ops=passes * lanes * 2, pim_bit_ops=passes * 4096 * 2, passes={int(bits): passes})


def report(tally, params=None, v=None):
    """Aggregate a workload tally into energy, time and the derived figures."""
    params = params or EnergyParams()
    point = dvfs(params.v_nominal if v is None else v, params)
    for k, n in tally.passes.items():
        if n < 0:
            raise ValueError("pass counts must be non-negative")
    if min(tally.ops, tally.pim_bit_ops, tally.cam_search_bits) < 0:
        raise ValueError("tallies must be non-negative")
    energy_fj = (params.pim_energy_factor * energy_pim(tally.pim_bit_ops, params, v)
                 + energy_cam(tally.cam_search_bits, 1, params, v))
    cycles = sum(n * cycles_per_pass(int(b), params) for b, n in tally.passes.items())
    seconds = cycles / (point["f_mhz"] * 1e6)
    joules = energy_fj * 1e-15
    tops = tally.ops / seconds * 1e-12 if seconds > 0 else 0.0
    power_w = joules / seconds if seconds > 0 else 0.0
    tops_per_watt = tops / power_w if power_w > 0 else 0.0
    return PerfReport(
        tops=tops,
        tops_per_watt=tops_per_watt,
        tops_per_mm2=tops / params.macro_area_mm2,
        energy_pj=energy_fj * 1e-3,
        latency_us=seconds * 1e6,
        power_mw=power_w * 1e3,
        f_mhz=point["f_mhz"],
        voltage=point["v"],
        op_counts=tally.to_dict(),
    )
