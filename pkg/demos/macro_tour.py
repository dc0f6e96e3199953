"""A short walk through every operating mode of one simulated macro.

    python3 demos/macro_tour.py
"""

import numpy as np

from fermisim import perf
from fermisim.cam_lut import build_lut, lut_lookup
from fermisim.cell_array import CellArray
from fermisim.compressor import approximate_spec, exact_spec
from fermisim.mac import PrecisionMode, dot_batch, xac_batch
from fermisim.numformats import Fp4


def show(title):
    print(f"\n== {title}")


def main():
    rng = np.random.default_rng(0)

    show("memory: write rows, read a row, read a column")
    arr = CellArray(8, 8, trace=True)
    img = rng.integers(0, 2, (8, 8))
    for r in range(8):
        arr.write_row(r, img[r])
    print("row 2    ", arr.read_row(2))
    print("column 5 ", arr.read_column(5))
    assert np.array_equal(arr.transpose_read(), img.T)

    show("CAM: binary and ternary search")
    print("bcam hits", arr.bcam_search(img[4]))
    tcam = CellArray(4, 4)
    tcam.load([[0, 0, 1, 1], [1, 1, 0, 1], [0, 1, 0, 1], [1, 1, 1, 1]])  # 01, 1X, XX, 11
    print("tcam 1X  ", tcam.tcam_search("1X"))

    show("PIM Boolean on rows 0 and 1")
    for name, bits in arr.pim_boolean(0, 1).items():
        print(f"{name:5}", bits)

    show("MAC: one INT8 pass and a binary XAC")
    mode = PrecisionMode.parse("int8")
    a = rng.integers(-128, 128, (4, mode.lanes))
    w = rng.integers(-128, 128, (4, mode.lanes))
    r = dot_batch(a, w, mode, exact_spec())
    print(f"{mode.name}: {mode.lanes} lanes, values {r.values.tolist()}")
    print("host     ", (a * w).sum(axis=1).tolist())
    approx = dot_batch(a, w, mode, approximate_spec(), approx_columns="half").values
    print("approx   ", approx.tolist())
    bits = rng.integers(0, 2, (2, 64))
    print("xac      ", xac_batch(bits, bits[::-1]).tolist())

    show("activation LUT in FP4")
    fp4 = Fp4()
    table = build_lut("sigmoid", fp4)
    for code in (0b1010, 0, 0b0010, 0b0111):
        out = lut_lookup(table, code)
        print(f"sigmoid({fp4.decode(code):+.1f}) -> {fp4.decode(out)}")

    show("headline figures")
    rep = perf.report(perf.sustained_tally(1))
    print(f"{rep.tops:.3g} TOPS  {rep.tops_per_watt:.3g} TOPS/W  {rep.tops_per_mm2:.3g} TOPS/mm2")
    print(f"trace of the 8x8 array: {len(arr.trace)} steps")


if __name__ == "__main__":
    main()
