"""Re-run the search that picks the shipped approximate compressor.

Every candidate drops one minterm of the exact cout logic.  Each is scored
on the reference workload and the lowest error rate wins.

    python3 demos/compressor_search.py
"""

from fermisim.compressor import (
    REFERENCE_WORKLOAD,
    approximate_spec,
    error_metrics,
    search_approximate_spec,
    stage1_candidates,
)


def main():
    print(f"workload {REFERENCE_WORKLOAD}")
    print(f"{'candidate':18} {'error rate':>10} {'NMED':>10} {'MRED':>10} {'max':>6}")
    for cand in stage1_candidates():
        m = error_metrics(cand, **REFERENCE_WORKLOAD)
        print(f"{cand.label:18} {m.error_rate:10.4f} {m.nmed:10.2e} {m.mred:10.2e} {m.max_error:6}")
    best = search_approximate_spec()
    print(f"\nselected: {best.label}")
    print(f"matches shipped table: {best == approximate_spec()}")
    print("entry errors:", {i: int(e) for i, e in enumerate(best.errors()) if e})


if __name__ == "__main__":
    main()
