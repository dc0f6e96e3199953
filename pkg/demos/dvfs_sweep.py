"""Throughput and efficiency across supply voltage and precision.

    python3 demos/dvfs_sweep.py
"""

from fermisim import perf


def main():
    params = perf.EnergyParams()
    volts = [round(params.v_min + 0.1 * i, 2) for i in range(5)]
    print(f"{'bits':>4} " + " ".join(f"{v:>13.2f}V" for v in volts))
    for bits in (1, 2, 4, 8, 16):
        cells = []
        for v in volts:
            rep = perf.report(perf.sustained_tally(bits, 10_000), params, v)
            cells.append(f"{rep.tops:6.3f}/{rep.tops_per_watt:7.1f}")
        print(f"{bits:>4} " + " ".join(cells))
    print("\ncells are TOPS / TOPS/W")
    for v in volts:
        op = perf.dvfs(v, params)
        print(f"{v:.2f} V: {op['f_mhz']:.1f} MHz, energy x{op['energy_scale']:.3f}")


if __name__ == "__main__":
    main()
