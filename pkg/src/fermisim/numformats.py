"""4-bit number formats used by the activation lookup tables.

FP4 is E2M1: 1 sign, 2 exponent, 1 mantissa bit, bias 1, subnormals at
exponent 0, no infinities or NaN, so the magnitudes are
0, 0.5, 1, 1.5, 2, 3, 4, 6.

Posit-4 follows the usual posit layout (sign, regime run, ``es`` exponent
bits, fraction) with 0000 = 0 and 1000 = NaR.  NaR decodes to ``nan``.

Both encoders round to the nearest representable value, ties to the even
code, and saturate at the largest finite magnitude.
"""

from __future__ import annotations

import functools
import math

import numpy as np

__all__ = [
    "NaRInput",
    "FP4_MAX",
    "POSIT4_NAR",
    "fp4_decode",
    "fp4_encode",
    "posit_decode",
    "posit4_decode",
    "posit4_encode",
    "Codec",
    "Fp4",
    "Posit4",
    "parse_codec",
]


class NaRInput(ValueError):
    pass


FP4_MAX = 6.0
POSIT4_NAR = 0b1000


def fp4_decode(code):
    if not 0 <= code < 16:
        raise ValueError(f"FP4 code must be 0..15, got {code}")
    sign = -1.0 if code & 0b1000 else 1.0
    exp = (code >> 1) & 0b11
    man = code & 1
    if exp == 0:
        mag = man * 0.5  # 0.m * 2**(1 - bias)
    else:
        mag = (1 + man / 2) * 2.0 ** (exp - 1)
    return sign * mag if mag else 0.0


_FP4_MAGS = [fp4_decode(c) for c in range(8)]


def _nearest_even(x, values, codes):
    """Index into sorted ``values`` nearest to x, ties to the even code."""
    i = int(np.searchsorted(values, x))
    if i == 0:
        return 0
    if i == len(values):
        return len(values) - 1
    lo, hi = values[i - 1], values[i]
    dlo, dhi = x - lo, hi - x
    if dlo < dhi:
        return i - 1
    if dhi < dlo:
        return i
    return i - 1 if codes[i - 1] % 2 == 0 else i


def fp4_encode(x):
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"FP4 encode needs a finite value, got {x}")
    mag = min(abs(x), FP4_MAX)
    k = _nearest_even(mag, _FP4_MAGS, list(range(8)))
    if k == 0:
        return 0
    return (0b1000 if x < 0 else 0) | k


def posit_decode(code, nbits=4, es=1):
    """Decode an ``nbits``-wide posit with ``es`` exponent bits."""
    mask = (1 << nbits) - 1
    if not 0 <= code <= mask:
        raise ValueError(f"posit code must be 0..{mask}, got {code}")
    if code == 0:
        return 0.0
    if code == 1 << (nbits - 1):
        return math.nan
    negative = bool(code >> (nbits - 1))
    if negative:
        code = (-code) & mask
    body = [(code >> i) & 1 for i in range(nbits - 2, -1, -1)]
    first = body[0]
    run = 1
    while run < len(body) and body[run] == first:
        run += 1
    k = run - 1 if first else -run
    rest = body[run + 1:]  # skip terminating bit
    exp_bits = (rest[:es] + [0] * es)[:es]
    exp = 0
    for b in exp_bits:
        exp = (exp << 1) | b
    frac_bits = rest[es:]
    frac = sum(b / 2 ** (i + 1) for i, b in enumerate(frac_bits))
    value = 2.0 ** (k * (1 << es) + exp) * (1 + frac)
    return -value if negative else value


def posit4_decode(code, es=1):
    if es not in (0, 1, 2):
        raise ValueError(f"es must be 0, 1 or 2, got {es}")
    return posit_decode(code, 4, es)


@functools.lru_cache(maxsize=None)
def _posit4_grid(es):
    codes = [c for c in range(16) if c != POSIT4_NAR]
    pairs = sorted((posit4_decode(c, es), c) for c in codes)
    return [v for v, _ in pairs], [c for _, c in pairs]


def posit4_encode(x, es=1):
    """Nearest posit-4 code; NaN (the host image of NaR) maps to NaR."""
    x = float(x)
    if math.isnan(x):
        return POSIT4_NAR
    if math.isinf(x):
        raise NaRInput(f"cannot encode {x} as a posit")
    values, codes = _posit4_grid(es)
    return codes[_nearest_even(x, values, codes)]


class Codec:
    """A 4-bit format as a pair of decode/encode functions plus its value grid."""

    name = "codec"

    def decode(self, code):
        raise NotImplementedError

    def encode(self, x):
        raise NotImplementedError

    @property
    def finite_values(self):
        """Sorted distinct finite values."""
        vals = {self.decode(c) for c in range(16)}
        return sorted(v for v in vals if not math.isnan(v))

    def special(self, code):
        return math.isnan(self.decode(code))

    def encode_positive(self, x):
        """Nearest code among strictly positive values (used for exp tables)."""
        pos = [v for v in self.finite_values if v > 0]
        x = min(max(float(x), pos[0]), pos[-1])
        codes = [self.encode(v) for v in pos]
        return codes[_nearest_even(x, pos, codes)]

    def half_spacing(self, y):
        """Half the gap between the representable values bracketing ``y``."""
        vals = self.finite_values
        if y < vals[0] or y > vals[-1]:
            raise ValueError(f"{y} outside the {self.name} range")
        i = int(np.searchsorted(vals, y))
        if i < len(vals) and vals[i] == y:
            return 0.0
        return (vals[i] - vals[i - 1]) / 2

    def spacing(self, y):
        vals = self.finite_values
        i = min(max(int(np.searchsorted(vals, y)), 1), len(vals) - 1)
        return vals[i] - vals[i - 1]

    def __repr__(self):
        return self.name


class Fp4(Codec):
    name = "fp4"

    def decode(self, code):
        return fp4_decode(code)

    def encode(self, x):
        return fp4_encode(x)

    def __eq__(self, other):
        return isinstance(other, Fp4)

    def __hash__(self):
        return hash("fp4")


class Posit4(Codec):
    def __init__(self, es=1):
        if es not in (0, 1, 2):
            raise ValueError(f"es must be 0, 1 or 2, got {es}")
        self.es = es
        self.name = f"posit4:{es}"

    def decode(self, code):
        return posit4_decode(code, self.es)

    def encode(self, x):
        return posit4_encode(x, self.es)

    def __eq__(self, other):
        return isinstance(other, Posit4) and other.es == self.es

    def __hash__(self):
        return hash(("posit4", self.es))


def parse_codec(name):
    """'fp4', 'posit4' or 'posit4:ES' -> codec instance."""
    name = name.strip().lower()
    if name == "fp4":
        return Fp4()
    if name.startswith("posit4"):
        _, _, es = name.partition(":")
        return Posit4(int(es) if es else 1)
    raise ValueError(f"unknown codec {name!r}; use fp4 or posit4[:es]")
