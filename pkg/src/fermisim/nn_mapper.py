"""Small neural networks on the simulated macro.

Covers the desk-scale flow: weights from CSV, post-training symmetric
per-tensor quantization, global magnitude pruning, greedy tiling onto
64 x 64 banks, and integer inference where every dot product goes through
:func:`fermisim.mac.mac_batch` with a chosen compressor spec.

Quantized inference, per layer::

    acc   = W_q . a_q + b_q                 (b_q = round(b / (s_w * s_a)))
    act   = activation(acc * s_w * s_a)
    a_q'  = clip(round(act / s_next), range of the next layer)

``s_next`` is a static activation scale fixed at calibration time.  ReLU
runs through :func:`fermisim.cam_lut.relu_vector` on the accumulator,
sigmoid/tanh through a 4-bit CAM table.  The last layer's prediction is
the argmax of its accumulator (softmax is monotone).
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cam_lut import build_lut, lut_lookup, relu_vector
from .compressor import exact_spec
from .mac import MacResult, OpTally, PrecisionMode, Signedness, dot_batch, mac_batch
from .numformats import parse_codec

__all__ = [
    "MapperError",
    "MalformedCsv",
    "ShapeMismatch",
    "InsufficientBanks",
    "AllZeroTensor",
    "ACTIVATIONS",
    "LayerSpec",
    "MacroGeometry",
    "Tile",
    "TileSchedule",
    "QorReport",
    "Model",
    "QuantizedModel",
    "InferenceResult",
    "ConvResult",
    "load_weights",
    "save_weights",
    "load_eval_set",
    "save_eval_set",
    "quantize",
    "prune",
    "global_prune",
    "map_layer",
    "quantize_model",
    "host_reference",
    "infer",
    "float_forward",
    "psnr",
    "conv_demo",
    "KERNELS",
]

ACTIVATIONS = ("relu", "sigmoid", "tanh", "softmax", "none")
QUANT_BITS = (1, 2, 4, 8, 16, 32)


class MapperError(Exception):
    pass


class MalformedCsv(MapperError, ValueError):
    def __init__(self, path, line, column, message):
        self.path, self.line, self.column = path, line, column
        super().__init__(f"{path}:{line}: column {column}: {message}")


class ShapeMismatch(MapperError, ValueError):
    pass


class InsufficientBanks(MapperError):
    pass


class AllZeroTensor(UserWarning):
    pass


# ---------------------------------------------------------------------------
# layer description


@dataclass(frozen=True)
class LayerSpec:
    """One dense or conv2d layer.

    Dense weights are (out_features, in_features).  Conv weights are
    (out_channels, in_channels, kh, kw) and ``input_hw`` is the input
    spatial size ('valid' padding).
    """

    kind: str
    in_features: int
    out_features: int
    activation: str = "none"
    precision: PrecisionMode = PrecisionMode(8)
    kernel: tuple = (1, 1)
    stride: int = 1
    input_hw: tuple = (1, 1)
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("dense", "conv2d"):
            raise ValueError(f"layer kind must be dense or conv2d, got {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if isinstance(self.precision, str):
            object.__setattr__(self, "precision", PrecisionMode.parse(self.precision))
        object.__setattr__(self, "kernel", tuple(int(k) for k in self.kernel))
        object.__setattr__(self, "input_hw", tuple(int(k) for k in self.input_hw))
        sizes = (self.in_features, self.out_features, self.stride, *self.kernel, *self.input_hw)
        if min(sizes) <= 0:
            raise ValueError("layer shape parameters must be positive")
        if self.kind == "conv2d" and any(i < k for i, k in zip(self.input_hw, self.kernel)):
            raise ValueError("conv kernel larger than its input")

    @property
    def weight_shape(self):
        if self.kind == "dense":
            return (self.out_features, self.in_features)
        return (self.out_features, self.in_features, *self.kernel)

    @property
    def fan_in(self):
        """Length of one output's dot product."""
        return self.in_features * (self.kernel[0] * self.kernel[1] if self.kind == "conv2d" else 1)

    @property
    def output_hw(self):
        if self.kind == "dense":
            return (1, 1)
        return tuple((i - k) // self.stride + 1 for i, k in zip(self.input_hw, self.kernel))

    @property
    def positions(self):
        h, w = self.output_hw
        return h * w

    @property
    def mac_count(self):
        return self.out_features * self.fan_in * self.positions

    def to_dict(self):
        d = {"kind": self.kind, "name": self.name, "in_features": self.in_features,
             "out_features": self.out_features, "activation": self.activation,
             "precision": self.precision.name}
        if self.kind == "conv2d":
            d.update(kernel=list(self.kernel), stride=self.stride, input_hw=list(self.input_hw))
        return d

    @classmethod
    def from_dict(cls, d):
        kw = {k: d[k] for k in ("kind", "in_features", "out_features", "activation", "precision",
                                "kernel", "stride", "input_hw", "name") if k in d}
        return cls(**kw)


@dataclass(frozen=True)
class MacroGeometry:
    rows: int = 64
    cols: int = 64
    banks: int = 16

    def __post_init__(self):
        if min(self.rows, self.cols, self.banks) <= 0:
            raise ValueError("macro geometry must be positive")

    def capacity(self, bits):
        """Weights one bank holds: each ``bits``-wide weight takes ``bits`` cells."""
        return self.rows * self.cols // bits

    def lanes(self, bits):
        return (self.rows // bits) * (self.cols // bits)


# ---------------------------------------------------------------------------
# tiling


@dataclass(frozen=True)
class Tile:
    """A run of weights of one output executed in one pass.

    Weights occupy bank slots ``[start, stop)``; slot ``s`` is row
    ``s // per_row``, columns ``(s % per_row) * bits`` onwards.
    ``lane_map[l]`` is the (output, fan-in index) pair computed in lane ``l``.
    """

    bank: int
    start: int
    stop: int
    per_row: int
    bits: int
    lane_map: tuple

    @property
    def row_range(self):
        return (self.start // self.per_row, (self.stop - 1) // self.per_row + 1)

    @property
    def col_range(self):
        if self.row_range[1] - self.row_range[0] > 1:
            return (0, self.per_row * self.bits)
        return ((self.start % self.per_row) * self.bits, ((self.stop - 1) % self.per_row + 1) * self.bits)

    @property
    def size(self):
        return self.stop - self.start


@dataclass
class TileSchedule:
    layer: LayerSpec
    geometry: MacroGeometry
    tiles: list
    passes: int
    banks_required: int
    lane_capacity: int

    def replay(self):
        """Yield every (position, output, fan-in index) pair the schedule computes."""
        for p in range(self.layer.positions):
            for tile in self.tiles:
                for o, i in tile.lane_map:
                    yield p, o, i

    def to_dict(self):
        return {
            "layer": self.layer.to_dict(),
            "passes": self.passes,
            "banks_required": self.banks_required,
            "lane_capacity": self.lane_capacity,
            "bank_capacity": self.geometry.capacity(self.layer.precision.bits),
            "tiles": [{"bank": t.bank, "rows": list(t.row_range), "cols": list(t.col_range),
                       "slots": [t.start, t.stop], "lanes": t.size} for t in self.tiles],
        }


def map_layer(layer, geometry=None):
    """Greedy row-major tiling of a layer's weight matrix onto banks.

    Each output's fan-in is cut into runs of at most one pass of lanes.
    Runs are packed into the current bank; a run that does not fit starts
    the next bank, so no run straddles banks.  Every tile is one pass per
    output position.
    """
    geometry = geometry or MacroGeometry()
    bits = layer.precision.bits
    capacity = geometry.capacity(bits)
    lanes = geometry.lanes(bits)
    per_row = geometry.cols // bits
    tiles = []
    bank, used = 0, 0
    for o in range(layer.out_features):
        for start in range(0, layer.fan_in, lanes):
            stop = min(start + lanes, layer.fan_in)
            size = stop - start
            if used + size > capacity:
                bank, used = bank + 1, 0
            lane_map = tuple((o, i) for i in range(start, stop))
            tiles.append(Tile(bank, used, used + size, per_row, bits, lane_map))
            used += size
    banks = bank + 1
    if banks > geometry.banks:
        raise InsufficientBanks(f"layer {layer.name or layer.kind} needs {banks} banks, "
                                f"{geometry.banks} available")
    return TileSchedule(layer, geometry, tiles, len(tiles) * layer.positions, banks, lanes)


# ---------------------------------------------------------------------------
# weight files


def _format_index(idx):
    return ";".join(str(int(i)) for i in idx)


def save_weights(tensors, path):
    """Write {name: array} as CSV rows ``layer,index,value`` (index ``i;j;...``)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layer", "index", "value"])
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype=np.float64)
            for idx in np.ndindex(arr.shape):
                w.writerow([name, _format_index(idx), repr(float(arr[idx]))])


def load_weights(path, shapes=None):
    """Read a weight CSV into {name: float64 array}.

    Shapes are inferred from the largest index unless ``shapes`` declares
    them.  Every cell of every tensor must be given exactly once.
    """
    entries = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["layer", "index", "value"]:
            raise MalformedCsv(path, 1, 1, "expected header layer,index,value")
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise MalformedCsv(path, lineno, min(len(row), 3) + 1, f"expected 3 fields, got {len(row)}")
            name, index, value = (c.strip() for c in row)
            if not name:
                raise MalformedCsv(path, lineno, 1, "empty layer name")
            try:
                idx = tuple(int(p) for p in index.split(";"))
            except ValueError:
                raise MalformedCsv(path, lineno, 2, f"bad index {index!r}") from None
            if any(i < 0 for i in idx):
                raise MalformedCsv(path, lineno, 2, f"negative index {index!r}")
            try:
                val = float(value)
            except ValueError:
                raise MalformedCsv(path, lineno, 3, f"non-numeric value {value!r}") from None
            if not math.isfinite(val):
                raise MalformedCsv(path, lineno, 3, f"non-finite value {value!r}")
            cells = entries.setdefault(name, {})
            if cells and len(next(iter(cells))) != len(idx):
                raise ShapeMismatch(f"{path}:{lineno}: {name} index rank changes to {len(idx)}")
            if idx in cells:
                raise ShapeMismatch(f"{path}:{lineno}: duplicate entry {name}[{index}]")
            cells[idx] = val
    shapes = shapes or {}
    out = {}
    for name, cells in entries.items():
        inferred = tuple(max(i[d] for i in cells) + 1 for d in range(len(next(iter(cells)))))
        shape = tuple(shapes.get(name, inferred))
        if len(shape) != len(inferred) or any(i > s for i, s in zip(inferred, shape)):
            raise ShapeMismatch(f"{name}: entries span {inferred}, declared {shape}")
        if len(cells) != math.prod(shape):
            raise ShapeMismatch(f"{name}: {len(cells)} entries for shape {shape}")
        arr = np.empty(shape, dtype=np.float64)
        for idx, v in cells.items():
            arr[idx] = v
        out[name] = arr
    missing = set(shapes) - set(out)
    if missing:
        raise ShapeMismatch(f"tensors missing from {path}: {sorted(missing)}")
    return out


def load_eval_set(path):
    """CSV rows ``f0,...,fk,label`` (header optional) -> (features, labels)."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise MalformedCsv(path, lineno, 0, "non-numeric field") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise ShapeMismatch(f"{path}: ragged or empty eval set")
    data = np.array(rows)
    return data[:, :-1], data[:, -1].astype(np.int64)


def save_eval_set(features, labels, path):
    features = np.asarray(features)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(features.shape[1])] + ["label"])
        for x, y in zip(features, labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


# ---------------------------------------------------------------------------
# quantization and pruning


def quantize(tensor, bits):
    """Symmetric per-tensor quantization -> (integer codes, scale).

    ``scale = max|w| / (2**(bits-1) - 1)``; bits=1 gives the sign (+1/-1)
    with scale ``mean|w|``.
    """
    if bits not in QUANT_BITS:
        raise ValueError(f"bits must be one of {QUANT_BITS}, got {bits}")
    w = np.asarray(tensor, dtype=np.float64)
    if w.size == 0:
        raise ValueError("cannot quantize an empty tensor")
    peak = float(np.max(np.abs(w)))
    if peak == 0.0:
        warnings.warn("all-zero tensor; returning zeros with scale 1", AllZeroTensor, stacklevel=2)
        return np.zeros(w.shape, dtype=np.int64), 1.0
    if bits == 1:
        return np.where(w >= 0, 1, -1).astype(np.int64), float(np.mean(np.abs(w)))
    qmax = (1 << (bits - 1)) - 1
    scale = peak / qmax
    codes = np.clip(np.round(w / scale), -qmax - 1, qmax).astype(np.int64)
    return codes, scale


def _smallest(magnitudes, k):
    # stable argsort = ties broken by index order
    return np.argsort(magnitudes, kind="stable")[:k]


def prune(tensor, fraction=0.40):
    """Zero the floor(fraction * count) smallest-magnitude weights."""
    if not 0 <= fraction < 1:
        raise ValueError(f"prune fraction must be in [0, 1), got {fraction}")
    w = np.array(tensor, dtype=np.float64)
    k = math.floor(fraction * w.size)
    flat = w.reshape(-1)
    flat[_smallest(np.abs(flat), k)] = 0.0
    return w


def global_prune(tensors, fraction=0.40):
    """Magnitude pruning over the concatenation of several tensors."""
    if not 0 <= fraction < 1:
        raise ValueError(f"prune fraction must be in [0, 1), got {fraction}")
    arrays = [np.asarray(t, dtype=np.float64) for t in tensors]
    flat = np.concatenate([a.reshape(-1) for a in arrays]) if arrays else np.zeros(0)
    k = math.floor(fraction * flat.size)
    flat[_smallest(np.abs(flat), k)] = 0.0
    out, pos = [], 0
    for a in arrays:
        out.append(flat[pos:pos + a.size].reshape(a.shape))
        pos += a.size
    return out


# ---------------------------------------------------------------------------
# models


@dataclass
class Model:
    """Float model: layers with their weight and bias tensors."""

    layers: list
    weights: list
    biases: list

    @classmethod
    def load(cls, path):
        """Model JSON: {"weights": csv, "layers": [{..., "weight": name, "bias": name}]}."""
        path = Path(path)
        desc = json.loads(path.read_text())
        layers = [LayerSpec.from_dict(d) for d in desc["layers"]]
        shapes = {}
        for d, layer in zip(desc["layers"], layers):
            shapes[d["weight"]] = layer.weight_shape
            if d.get("bias"):
                shapes[d["bias"]] = (layer.out_features,)
        tensors = load_weights(path.parent / desc["weights"], shapes)
        weights = [tensors[d["weight"]] for d in desc["layers"]]
        biases = [tensors[d["bias"]] if d.get("bias") else np.zeros(l.out_features)
                  for d, l in zip(desc["layers"], layers)]
        return cls(layers, weights, biases)

    def save(self, path, weights_file="weights.csv"):
        path = Path(path)
        tensors, descs = {}, []
        for i, (layer, w, b) in enumerate(zip(self.layers, self.weights, self.biases)):
            name = layer.name or f"layer{i}"
            tensors[f"{name}.weight"] = w
            tensors[f"{name}.bias"] = b
            descs.append(dict(layer.to_dict(), weight=f"{name}.weight", bias=f"{name}.bias"))
        save_weights(tensors, path.parent / weights_file)
        path.write_text(json.dumps({"weights": weights_file, "layers": descs}, indent=2) + "\n")

    def __post_init__(self):
        for layer, w, b in zip(self.layers, self.weights, self.biases):
            if np.shape(w) != layer.weight_shape:
                raise ShapeMismatch(f"{layer.name}: weight {np.shape(w)} != {layer.weight_shape}")
            if np.shape(b) != (layer.out_features,):
                raise ShapeMismatch(f"{layer.name}: bias {np.shape(b)} != ({layer.out_features},)")
        if any(l.kind != "dense" for l in self.layers):
            raise NotImplementedError("model inference supports dense layers; use conv_demo for convolution")


def _activate(name, x):
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-x))
    if name == "tanh":
        return np.tanh(x)
    return x  # softmax is monotone and the last layer is read by argmax


def float_forward(model, inputs):
    """Host float64 reference; returns the last layer's pre-activation outputs."""
    a = np.asarray(inputs, dtype=np.float64)
    for k, (layer, w, b) in enumerate(zip(model.layers, model.weights, model.biases)):
        z = a @ w.T + b
        a = z if k == len(model.layers) - 1 else _activate(layer.activation, z)
    return a


@dataclass
class QuantizedModel:
    layers: list
    weights: list  # integer codes
    w_scales: list
    biases: list  # integer, at accumulator scale
    act_scales: list  # input scale of each layer
    sparsity: float = 0.0
    codec: object = None

    @property
    def input_mode(self):
        return self.layers[0].precision


def _act_quantize(x, scale, mode):
    if mode.signedness is Signedness.BIPOLAR_BINARY:
        return np.where(x >= 0, 1, -1).astype(np.int64)
    return np.clip(np.round(x / scale), mode.lo, mode.hi).astype(np.int64)


def _act_scale(x, mode):
    peak = float(np.max(np.abs(x))) if np.size(x) else 0.0
    if peak == 0.0:
        return 1.0
    if mode.signedness is Signedness.BIPOLAR_BINARY:
        return 1.0
    return peak / mode.hi


def quantize_model(model, calibration, prune_fraction=0.40, codec="fp4"):
    """Prune (globally), quantize weights and fix static activation scales.

    Activation scales come from the float model's activations on
    ``calibration`` inputs (max magnitude per layer input).
    """
    weights = global_prune(model.weights, prune_fraction) if prune_fraction else list(model.weights)
    total = sum(w.size for w in weights)
    zeros = sum(int(np.count_nonzero(w == 0)) for w in weights)
    a = np.asarray(calibration, dtype=np.float64)
    act_scales, wq, ws, bq = [], [], [], []
    for layer, w, b in zip(model.layers, weights, model.biases):
        s_a = _act_scale(a, layer.precision)
        codes, s_w = quantize(w, layer.precision.bits)
        act_scales.append(s_a)
        wq.append(codes)
        ws.append(s_w)
        bq.append(np.round(np.asarray(b) / (s_w * s_a)).astype(np.int64))
        a = _activate(layer.activation, a @ w.T + b)
    codec = parse_codec(codec) if isinstance(codec, str) else codec
    return QuantizedModel(list(model.layers), wq, ws, bq, act_scales, zeros / total if total else 0.0, codec)


@dataclass
class QorReport:
    quantized_accuracy: float
    float_accuracy: float
    qor: float
    sparsity: float

    def to_dict(self):
        return {"quantized_accuracy": self.quantized_accuracy, "float_accuracy": self.float_accuracy,
                "qor": self.qor, "sparsity": self.sparsity}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class InferenceResult:
    outputs: np.ndarray  # last layer accumulators (integers)
    predictions: np.ndarray
    qor: QorReport | None
    tally: OpTally = field(default_factory=OpTally)
    schedules: list = field(default_factory=list)


def _layer_dots_macro(a_q, w_q, mode, spec, approx_columns=None):
    """(B, in) x (out, in) -> (B, out) accumulators, every dot product on the macro."""
    batch, fan_in = a_q.shape
    out = w_q.shape[0]
    inputs = np.repeat(a_q, out, axis=0)
    weights = np.tile(w_q, (batch, 1))
    run = mac_batch if fan_in <= mode.lanes else dot_batch
    r: MacResult = run(inputs, weights, mode, spec, approx_columns)
    return np.asarray(r.values, dtype=np.int64).reshape(batch, out), r


def _layer_dots_host(a_q, w_q):
    return a_q @ w_q.T


def _hidden_activation(qm, k, acc, step):
    """Accumulator of layer k -> input codes of layer k+1."""
    layer = qm.layers[k]
    real_scale = qm.w_scales[k] * qm.act_scales[k]
    nxt = qm.layers[k + 1].precision
    if layer.activation == "relu":
        acc = relu_vector(acc, PrecisionMode(64))
        return _act_quantize(acc * real_scale, qm.act_scales[k + 1], nxt)
    if layer.activation in ("sigmoid", "tanh"):
        codec = qm.codec or parse_codec("fp4")
        codes = np.vectorize(codec.encode, otypes=[np.int64])(acc * real_scale)
        values = np.vectorize(codec.decode, otypes=[np.float64])(step(layer.activation, codec, codes))
        return _act_quantize(values, qm.act_scales[k + 1], nxt)
    return _act_quantize(acc * real_scale, qm.act_scales[k + 1], nxt)


def _lut_step_macro(function, codec, codes):
    table = build_lut(function, codec)
    lut = np.array([lut_lookup(table, c) for c in range(16)])
    return lut[codes]


def _lut_step_host(function, codec, codes):
    from .cam_lut import table_value
    lut = np.array([table_value(function, codec, c) for c in range(16)])
    return lut[codes]


def _run(qm, inputs, dots, step):
    a = _act_quantize(np.asarray(inputs, dtype=np.float64), qm.act_scales[0], qm.input_mode)
    for k in range(len(qm.layers)):
        acc = dots(k, a) + qm.biases[k]
        if k == len(qm.layers) - 1:
            return acc
        a = _hidden_activation(qm, k, acc, step)


def host_reference(qm, inputs):
    """Pure host integer inference of the quantized network (numpy matmul)."""
    return _run(qm, inputs, lambda k, a: _layer_dots_host(a, qm.weights[k]), _lut_step_host)


def infer(qm, inputs, spec=None, labels=None, float_model=None, geometry=None, approx_columns="half"):
    """Run a quantized model with every MAC on the simulated macro.

    With ``labels`` and ``float_model`` a :class:`QorReport` is attached.
    The op tally counts only non-zero (unpruned) weights.
    """
    spec = spec or exact_spec()
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 1:
        inputs = inputs[None]
    schedules = [map_layer(layer, geometry) for layer in qm.layers]
    tally = OpTally()
    batch = inputs.shape[0]

    def dots(k, a):
        nonlocal tally
        mode = qm.layers[k].precision
        cut = mode.bits // 2 if approx_columns == "half" else approx_columns
        acc, r = _layer_dots_macro(a, qm.weights[k], mode, spec, cut)
        live = int(np.count_nonzero(qm.weights[k]))
        total = qm.weights[k].size
        keep = live / total if total else 0.0
        tally = tally + OpTally(ops=2 * live * batch, pim_bit_ops=round(r.bit_op_count * keep),
                                passes={qm.layers[k].precision.bits: batch * schedules[k].passes})
        return acc

    outputs = _run(qm, inputs, dots, _lut_step_macro)
    predictions = np.argmax(outputs, axis=1)
    qor = None
    if labels is not None and float_model is not None:
        labels = np.asarray(labels)
        q_acc = float(np.mean(predictions == labels))
        f_acc = float(np.mean(np.argmax(float_forward(float_model, inputs), axis=1) == labels))
        qor = QorReport(q_acc, f_acc, q_acc / f_acc if f_acc else 0.0, qm.sparsity)
    return InferenceResult(outputs, predictions, qor, tally, schedules)


# ---------------------------------------------------------------------------
# image convolution demo

KERNELS = {
    # 3x3 binomial blur, result >> 4
    "smoothing": (np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]]), 4),
    # Laplacian, magnitude clipped to 8 bits
    "edge": (np.array([[0, -1, 0], [-1, 4, -1], [0, -1, 0]]), 0),
}


def psnr(test, reference, peak=255.0):
    """PSNR in dB; identical images give ``inf``."""
    test = np.asarray(test, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    mse = float(np.mean((test - reference) ** 2))
    return math.inf if mse == 0 else 10 * math.log10(peak * peak / mse)


@dataclass
class ConvResult:
    image: np.ndarray
    reference: np.ndarray
    psnr_db: float
    note: str = ""
    tally: OpTally = field(default_factory=OpTally)


def _windows(image, k):
    padded = np.pad(image, k // 2)
    h, w = image.shape
    return np.stack([padded[r:r + k, c:c + k].reshape(-1) for r in range(h) for c in range(w)])


def _postprocess(acc, kernel, shift, shape):
    if kernel == "smoothing":
        out = acc >> shift
    else:
        out = np.abs(acc)
    return np.clip(out, 0, 255).astype(np.uint8).reshape(shape)


def conv_demo(image, kernel="smoothing", spec=None, approx_columns="half"):
    """3x3 'same' convolution of an 8-bit image, every window on the macro.

    Operands are INT16 two's complement (pixels 0..255 and the kernel taps).
    PSNR compares the ``spec`` result with the exact-spec result.
    ``approx_columns`` is as for :func:`infer`.
    """
    image = np.asarray(image)
    if image.ndim != 2 or image.size == 0:
        raise ValueError("conv_demo needs a non-empty 2-D grayscale image")
    if image.min() < 0 or image.max() > 255:
        raise ValueError("pixel values must be 8-bit (0..255)")
    if kernel not in KERNELS:
        raise ValueError(f"kernel must be one of {sorted(KERNELS)}")
    taps, shift = KERNELS[kernel]
    mode = PrecisionMode(16)
    spec = spec or exact_spec()
    win = _windows(image.astype(np.int64), taps.shape[0])
    weights = np.broadcast_to(taps.reshape(-1), win.shape)
    cut = mode.bits // 2 if approx_columns == "half" else approx_columns
    approx = mac_batch(win, weights, mode, spec, cut)
    exact_values = approx.values if spec.is_exact else mac_batch(win, weights, mode, exact_spec()).values
    out = _postprocess(np.asarray(approx.values, dtype=np.int64), kernel, shift, image.shape)
    ref = _postprocess(np.asarray(exact_values, dtype=np.int64), kernel, shift, image.shape)
    value = psnr(out, ref)
    note = ""
    if not ref.any() and not out.any():
        note = "all-zero output; PSNR undefined, reported as inf"
    return ConvResult(out, ref, value, note, approx.tally())
