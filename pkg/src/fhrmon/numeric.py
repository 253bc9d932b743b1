"""Numeric backends shared by the streaming pipeline stages.

Every filter/datapath in this package is written once and parameterized by a
backend: the soft-float32 backend routes each operation through the bit-level
unit in :mod:`fhrmon.fpu` (the hardware-faithful mode), while the float64
backend runs the identical algorithm in native double precision.  The second
path exists so tests can bound the truncation drift of the first.

Values are opaque to the algorithms: integer words on the soft path, plain
floats on the reference path.  ``encode``/``decode`` convert at the edges.
"""

from __future__ import annotations

from . import fpu
from .fpu import CmpCode, FpuFlags


class SoftF32Backend:
    """Bit-level float32 arithmetic with an owned flag accumulator."""

    name = "soft"

    def __init__(self, cmp_mode: str = "corrected"):
        self.cmp_mode = cmp_mode
        self.flags = FpuFlags()
        self.zero = fpu.ZERO_POS

    def encode(self, value: float) -> int:
        return fpu.encode(value)

    def decode(self, word: int) -> float:
        return fpu.decode(word)

    def add(self, a: int, b: int) -> int:
        return fpu.fpu_add(a, b, self.flags)

    def sub(self, a: int, b: int) -> int:
        return fpu.fpu_sub(a, b, self.flags)

    def mul(self, a: int, b: int) -> int:
        return fpu.fpu_mul(a, b, self.flags)

    def gt(self, a: int, b: int) -> bool:
        return fpu.fpu_cmp(a, b, self.cmp_mode) is CmpCode.GREATER

    def lt(self, a: int, b: int) -> bool:
        return fpu.fpu_cmp(a, b, self.cmp_mode) is CmpCode.LESS


class Float64Backend:
    """Native double-precision reference arithmetic (test/diagnostic path)."""

    name = "float64"

    def __init__(self, cmp_mode: str = "corrected"):
        self.cmp_mode = cmp_mode  # accepted for interface parity; unused
        self.flags = FpuFlags()
        self.zero = 0.0

    def encode(self, value: float) -> float:
        return float(value)

    def decode(self, value: float) -> float:
        return value

    @staticmethod
    def add(a: float, b: float) -> float:
        return a + b

    @staticmethod
    def sub(a: float, b: float) -> float:
        return a - b

    @staticmethod
    def mul(a: float, b: float) -> float:
        return a * b

    @staticmethod
    def gt(a: float, b: float) -> bool:
        return a > b

    @staticmethod
    def lt(a: float, b: float) -> bool:
        return a < b


def make_backend(name: str, cmp_mode: str = "corrected"):
    if name == "soft":
        return SoftF32Backend(cmp_mode)
    if name == "float64":
        return Float64Backend(cmp_mode)
    raise ValueError(f"unknown backend: {name!r}")


def quantized(value: float) -> float:
    """The float32-quantized double value of ``value``.

    Both backends draw their constants from here so they run with identical
    coefficients and differ only in arithmetic.
    """
    return fpu.decode(fpu.encode(value))
