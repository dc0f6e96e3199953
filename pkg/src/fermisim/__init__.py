"""Functional simulator of a 64 x 64 CAM/PIM SRAM macro.

Modules:

* :mod:`fermisim.cell_array` - bit-cell array, CAM searches, in-memory Boolean ops
* :mod:`fermisim.compressor` - 4:2 compressor truth tables, reduction trees, error metrics
* :mod:`fermisim.mac` - variable-precision SIMD multiply-accumulate
* :mod:`fermisim.numformats`, :mod:`fermisim.cam_lut` - 4-bit codecs and activation tables
* :mod:`fermisim.perf` - energy / throughput / area model
* :mod:`fermisim.nn_mapper` - quantization, pruning, tiling and inference
"""

from .cam_lut import build_lut, lut_lookup, relu_vector, softmax
from .cell_array import CellArray, Mode
from .compressor import (
    CompressorSpec,
    ErrorMetrics,
    accumulate,
    approximate_spec,
    build_tree,
    error_metrics,
    exact_spec,
    popcount,
)
from .mac import PrecisionMode, Signedness, dot, mac_batch, simd_pass, xac
from .nn_mapper import LayerSpec, Model, conv_demo, infer, map_layer, prune, quantize, quantize_model
from .numformats import Fp4, Posit4, parse_codec
from .perf import EnergyParams, dvfs, report, throughput

__version__ = "0.1.0"

__all__ = [
    "CellArray",
    "Mode",
    "CompressorSpec",
    "ErrorMetrics",
    "exact_spec",
    "approximate_spec",
    "build_tree",
    "popcount",
    "accumulate",
    "error_metrics",
    "PrecisionMode",
    "Signedness",
    "mac_batch",
    "dot",
    "xac",
    "simd_pass",
    "Fp4",
    "Posit4",
    "parse_codec",
    "build_lut",
    "lut_lookup",
    "relu_vector",
    "softmax",
    "EnergyParams",
    "dvfs",
    "throughput",
    "report",
    "LayerSpec",
    "Model",
    "quantize",
    "prune",
    "map_layer",
    "quantize_model",
    "infer",
    "conv_demo",
]
