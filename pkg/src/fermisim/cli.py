"""``fermisim`` command line.

Every subcommand is a thin wrapper: it resolves a :class:`RunConfig`,
calls the library and writes CSV/JSON reports into ``--out``.  Exit codes:
0 success, 1 runtime error, 2 usage error (bad arguments or inputs).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import cam_lut, cell_array, compressor, mac, nn_mapper, perf
from .numformats import parse_codec

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    rows: int = 64
    cols: int = 64
    banks: int = 16
    spec: str = "exact"
    codec: str = "fp4"
    seed: int = 0
    out: str = "."
    voltage: float | None = None
    energy: dict = field(default_factory=dict)

    @property
    def geometry(self):
        return nn_mapper.MacroGeometry(self.rows, self.cols, self.banks)

    def energy_params(self):
        return perf.EnergyParams().with_overrides(**self.energy)

    def compressor_spec(self):
        if self.spec == "exact":
            return compressor.exact_spec()
        if self.spec in ("approx", "approximate"):
            return compressor.approximate_spec()
        return compressor.CompressorSpec.load(self.spec)

    def out_dir(self):
        p = Path(self.out)
        p.mkdir(parents=True, exist_ok=True)
        return p


_ENERGY_KEYS = {f.name for f in fields(perf.EnergyParams)}


def load_config(path, base=None):
    """``key = value`` text; energy parameter names go to ``energy``."""
    cfg = base or RunConfig()
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        if key in _ENERGY_KEYS:
            cfg.energy[key] = float(value)
        elif key in ("rows", "cols", "banks", "seed"):
            setattr(cfg, key, int(value))
        elif key == "voltage":
            cfg.voltage = float(value)
        elif key in ("spec", "codec", "out"):
            setattr(cfg, key, value)
        else:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
    return cfg


def resolve_config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    for key in ("seed", "out", "voltage", "spec", "codec"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    return cfg


# ---------------------------------------------------------------------------
# output helpers


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _bits_arg(text):
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise UsageError(f"expected a 0/1 string, got {text!r}")
    return np.array([int(c) for c in text], dtype=np.uint8)


def _slice_arg(text):
    if text is None:
        return None
    lo, sep, hi = text.partition(":")
    if not sep:
        raise UsageError(f"expected a column range lo:hi, got {text!r}")
    return slice(int(lo), int(hi))


def _int_matrix(path):
    return np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)


def _report(msg):
    print(msg)


# ---------------------------------------------------------------------------
# commands


def cmd_array(args, cfg):
    out = cfg.out_dir()
    if args.image:
        arr = cell_array.CellArray.load_image(args.image, trace=True)
    else:
        arr = cell_array.CellArray(cfg.rows, cfg.cols, trace=True)
    op = args.op
    if op == "write":
        arr.write_row(args.row, _bits_arg(args.bits))
        arr.save_text(out / "array.txt")
        _report(f"wrote row {args.row}")
    elif op == "read":
        bits = arr.read_row(args.row)
        _write_csv(out / "read.csv", ["column", "bit"], enumerate(bits.tolist()))
        _report("".join(map(str, bits)))
    elif op == "read-column":
        bits = arr.read_column(args.column)
        _write_csv(out / "read.csv", ["row", "bit"], enumerate(bits.tolist()))
        _report("".join(map(str, bits)))
    elif op == "transpose":
        t = arr.transpose_read()
        (out / "transpose.txt").write_text("\n".join("".join(map(str, r)) for r in t) + "\n")
        _report(f"transposed {arr.rows}x{arr.cols} image")
    elif op == "bcam":
        key = _bits_arg(args.key)
        match = arr.bcam_search(key, columns=_slice_arg(args.columns))
        _write_csv(out / "match.csv", ["row", "match"], enumerate(match.tolist()))
        _report(f"{int(match.sum())} matching rows")
    elif op == "tcam":
        match = arr.tcam_search(args.key.strip(), strict=args.strict)
        _write_csv(out / "match.csv", ["row", "match"], enumerate(match.tolist()))
        _report(f"{int(match.sum())} matching rows")
    elif op == "pim":
        res = arr.pim_boolean(args.rows[0], args.rows[1])
        rows = zip(range(arr.cols), res["and"].tolist(), res["nor"].tolist(), res["xnor"].tolist())
        _write_csv(out / "pim.csv", ["column", "and", "nor", "xnor"], rows)
        _report("xnor " + "".join(map(str, res["xnor"])))
    arr.write_trace(out / "trace.csv")
    return EXIT_OK


def cmd_mac(args, cfg):
    mode = mac.PrecisionMode.parse(args.mode, rows=cfg.rows, cols=cfg.cols)
    a = _int_matrix(args.inputs)
    w = _int_matrix(args.weights)
    if a.shape != w.shape:
        raise UsageError(f"inputs {a.shape} and weights {w.shape} differ in shape")
    r = mac.dot_batch(a, w, mode, cfg.compressor_spec())
    out = cfg.out_dir()
    _write_csv(out / "mac.csv", ["index", "value"], enumerate(np.asarray(r.values).tolist()))
    _write_json(out / "mac.json", {"mode": mode.name, "width": r.width, "passes": r.passes,
                                   "cycles": r.cycle_count, "bit_ops": r.bit_op_count,
                                   "spec": cfg.compressor_spec().label})
    _report(f"{len(r.values)} dot products in {r.passes} passes")
    return EXIT_OK


def cmd_lut(args, cfg):
    codec = parse_codec(cfg.codec)
    table = cam_lut.build_lut(args.function, codec)
    out = cfg.out_dir()
    table.save_csv(out / "lut.csv")
    if args.keys:
        keys = [int(k, 0) for k in args.keys.split(",")]
        rows = []
        for k in keys:
            v = cam_lut.lut_lookup(table, k)
            rows.append((k, codec.decode(k), v, codec.decode(v)))
        _write_csv(out / "lookup.csv", ["key_code", "key_value_real", "value_code", "value_real"], rows)
    _report(f"{args.function} table over {codec.name} written")
    return EXIT_OK


def cmd_perf(args, cfg):
    params = cfg.energy_params()
    mode = mac.PrecisionMode.parse(args.mode)
    out = cfg.out_dir()
    rep = perf.report(perf.sustained_tally(mode.bits, args.passes), params, cfg.voltage)
    _write_json(out / "perf.json", rep.to_dict())
    (out / "perf.csv").write_text(rep.to_csv())
    if args.sweep:
        rows = []
        steps = int(round((params.v_max - params.v_min) / 0.05))
        for i in range(steps + 1):
            v = round(params.v_min + 0.05 * i, 10)
            for bits in (1, 2, 4, 8, 16, 32, 64):
                r = perf.report(perf.sustained_tally(bits, args.passes), params, v)
                rows.append((v, bits, r.f_mhz, r.tops, r.tops_per_watt, r.tops_per_mm2, r.power_mw))
        _write_csv(out / "perf_sweep.csv",
                   ["voltage", "bits", "f_mhz", "tops", "tops_per_watt", "tops_per_mm2", "power_mw"], rows)
    _report(f"{mode.name} @ {rep.voltage} V, {rep.f_mhz:.1f} MHz: {rep.tops:.4g} TOPS, "
            f"{rep.tops_per_watt:.4g} TOPS/W, {rep.tops_per_mm2:.4g} TOPS/mm2")
    return EXIT_OK


def _parse_layer(text):
    # dense:IN x OUT:MODE, e.g. dense:64x8:int8
    try:
        kind, shape, prec = text.split(":")
        fan_in, fan_out = (int(s) for s in shape.lower().split("x"))
    except ValueError:
        raise UsageError(f"layer must look like dense:64x8:int8, got {text!r}") from None
    return nn_mapper.LayerSpec(kind, fan_in, fan_out, precision=prec)


def cmd_map(args, cfg):
    if args.layer:
        layers = [_parse_layer(t) for t in args.layer]
    else:
        layers = nn_mapper.Model.load(args.model or _shipped("model.json")).layers
    schedules = [nn_mapper.map_layer(l, cfg.geometry) for l in layers]
    out = cfg.out_dir()
    _write_json(out / "schedule.json", [s.to_dict() for s in schedules])
    _write_csv(out / "schedule.csv", ["layer", "precision", "weights", "passes", "banks"],
               [(l.name or i, l.precision.name, l.out_features * l.fan_in, s.passes, s.banks_required)
                for i, (l, s) in enumerate(zip(layers, schedules))])
    for l, s in zip(layers, schedules):
        _report(f"{l.name or l.kind} {l.precision.name}: {s.passes} passes, {s.banks_required} banks")
    return EXIT_OK


def _shipped(name):
    return resources.files("fermisim") / "data" / "digits_mlp" / name


def cmd_infer(args, cfg):
    model_path = Path(args.model) if args.model else Path(str(_shipped("model.json")))
    model = nn_mapper.Model.load(model_path)
    X, y = nn_mapper.load_eval_set(args.eval or str(_shipped("eval.csv")))
    calib, _ = nn_mapper.load_eval_set(args.calibration or str(_shipped("calibration.csv")))
    qm = nn_mapper.quantize_model(model, calib, args.prune, codec=cfg.codec)
    res = nn_mapper.infer(qm, X, cfg.compressor_spec(), y, model, cfg.geometry)
    out = cfg.out_dir()
    _write_json(out / "qor.json", res.qor.to_dict())
    _write_csv(out / "predictions.csv", ["index", "label", "prediction"],
               zip(range(len(y)), y.tolist(), res.predictions.tolist()))
    rep = perf.report(res.tally, cfg.energy_params(), cfg.voltage)
    _write_json(out / "perf.json", rep.to_dict())
    q = res.qor
    _report(f"accuracy {q.quantized_accuracy:.4f} (float {q.float_accuracy:.4f}), QoR {q.qor:.4f}, "
            f"sparsity {q.sparsity:.3f}")
    return EXIT_OK


def cmd_metrics(args, cfg):
    spec = cfg.compressor_spec()
    m = compressor.error_metrics(spec, args.width, args.count, args.policy, args.workload)
    out = cfg.out_dir()
    (out / "metrics.json").write_text(m.to_json() + "\n")
    (out / "metrics.csv").write_text(",".join(m.CSV_FIELDS) + "\n" + m.to_csv_row() + "\n")
    _report(f"{spec.label}: error rate {m.error_rate:.6g}, NMED {m.nmed:.6g}, MRED {m.mred:.6g}, "
            f"max error {m.max_error}")
    return EXIT_OK


def _load_gray(path):
    p = str(path)
    if p.endswith(".csv"):
        return _int_matrix(p)
    if p.endswith(".npy"):
        return np.load(p)
    return np.loadtxt(p, dtype=np.int64, ndmin=2)


def cmd_demo_conv(args, cfg):
    if args.image:
        image = _load_gray(args.image)
    else:
        image = np.random.default_rng(cfg.seed).integers(0, 256, (args.size, args.size))
    res = nn_mapper.conv_demo(image, args.kernel, cfg.compressor_spec())
    out = cfg.out_dir()
    np.savetxt(out / "conv.csv", res.image, fmt="%d", delimiter=",")
    np.savetxt(out / "conv_reference.csv", res.reference, fmt="%d", delimiter=",")
    psnr = res.psnr_db if math.isfinite(res.psnr_db) else "inf"
    _write_json(out / "conv.json", {"kernel": args.kernel, "psnr_db": psnr, "note": res.note,
                                    "spec": cfg.compressor_spec().label})
    _report(f"{args.kernel}: PSNR {psnr} dB {res.note}".rstrip())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _globals(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--config", default=d, help="key = value configuration file")
    g.add_argument("--seed", type=int, default=d)
    g.add_argument("--out", default=d, help="output directory for reports")
    g.add_argument("--voltage", type=float, default=d, help="supply voltage (V)")
    g.add_argument("--spec", default=d, help="compressor truth table (.ctt), 'exact' or 'approx'")
    g.add_argument("--codec", default=d, help="fp4 or posit4[:es]")


def build_parser():
    p = argparse.ArgumentParser(prog="fermisim", description="Functional simulator of a CAM/PIM SRAM macro.")
    _globals(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help):
        sp = sub.add_parser(name, help=help)
        _globals(sp, suppress=True)
        return sp

    a = add("array", "cell-array operations")
    a.add_argument("op", choices=["write", "read", "read-column", "transpose", "bcam", "tcam", "pim"])
    a.add_argument("--image", help="array image (text rows of 0/1, or .csv)")
    a.add_argument("--row", type=int, default=0)
    a.add_argument("--column", type=int, default=0)
    a.add_argument("--bits", default="")
    a.add_argument("--key", default="")
    a.add_argument("--columns", help="restrict a BCAM search to columns lo:hi")
    a.add_argument("--rows", type=int, nargs=2, default=(0, 1), help="two rows for PIM Boolean")
    a.add_argument("--strict", action="store_true", help="TCAM: invalid ternary pairs are errors")
    a.set_defaults(func=cmd_array)

    m = add("mac", "dot products on the macro")
    m.add_argument("--mode", default="int8", help="int1..int64, uint1..uint64 or bin")
    m.add_argument("--inputs", required=True, help="CSV, one dot product per row")
    m.add_argument("--weights", required=True, help="CSV shaped like --inputs")
    m.set_defaults(func=cmd_mac)

    l = add("lut", "build an activation table and look keys up")
    l.add_argument("--function", default="sigmoid", choices=sorted(cam_lut.FUNCTIONS))
    l.add_argument("--keys", help="comma-separated 4-bit codes to look up")
    l.set_defaults(func=cmd_lut)

    pf = add("perf", "throughput / efficiency report")
    pf.add_argument("--mode", default="int1")
    pf.add_argument("--passes", type=int, default=1_000_000)
    pf.add_argument("--sweep", action="store_true", help="also write a voltage x precision sweep")
    pf.set_defaults(func=cmd_perf)

    mp = add("map", "tile layers onto banks")
    mp.add_argument("--model", help="model JSON (default: shipped digits MLP)")
    mp.add_argument("--layer", action="append", help="ad-hoc layer, e.g. dense:64x8:int8 (repeatable)")
    mp.set_defaults(func=cmd_map)

    inf = add("infer", "quantized inference with QoR")
    inf.add_argument("--model")
    inf.add_argument("--eval", help="eval CSV (features..., label)")
    inf.add_argument("--calibration", help="calibration CSV for activation scales")
    inf.add_argument("--prune", type=float, default=0.40)
    inf.set_defaults(func=cmd_infer)

    me = add("metrics", "approximate-compressor error metrics")
    me.add_argument("--width", type=int, default=8)
    me.add_argument("--count", type=int, default=1)
    me.add_argument("--policy", default="exhaustive")
    me.add_argument("--workload", default="mac", choices=compressor.WORKLOADS)
    me.set_defaults(func=cmd_metrics)

    dc = add("demo-conv", "3x3 convolution demo with PSNR")
    dc.add_argument("--image", help="grayscale image (.csv, .npy or whitespace text)")
    dc.add_argument("--kernel", default="smoothing", choices=sorted(nn_mapper.KERNELS))
    dc.add_argument("--size", type=int, default=64, help="side of the random image when --image is absent")
    dc.set_defaults(func=cmd_demo_conv)
    return p


_USAGE_ERRORS = (UsageError, ValueError, IndexError, KeyError)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except _USAGE_ERRORS as e:
        print(f"fermisim: error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001 - any module failure is a runtime error
        print(f"fermisim: error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
