"""Bit-exact integer/fixed-point arithmetic and quantization semantics.

All scalar operations here are the reference definitions: plain Python
integers (arbitrary precision) and floats, no numpy.  The vectorized twins
used by the execution engine live in adaflow.engine.vecquant and are tested
against these.

Conventions:
  * a fixed-point value is an integer raw code interpreted as
    ``raw * 2**-frac_bits``;
  * a quantized activation/weight code c represents ``(c - zero_point) * scale``;
  * rounding modes: ``half_even`` (ties to even, the default), ``half_up``
    (ties away from zero), ``floor`` (toward minus infinity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

from .errors import CodeOutOfRange, WidthOverflow

ROUNDING_MODES = ("half_even", "half_up", "floor")
OVERFLOW_MODES = ("saturate", "wrap")

# Mantissa width of the integer requantization multiplier.
MULTIPLIER_BITS = 31


def _check_rounding(mode: str) -> None:
    if mode not in ROUNDING_MODES:
        raise ValueError(f"unknown rounding mode {mode!r}")


@dataclass(frozen=True)
class FxFormat:
    """Fixed-point word format: container width, binary point, signedness."""

    word_bits: int
    frac_bits: int = 0
    signed: bool = True
    rounding: str = "half_even"
    overflow: str = "saturate"

    def __post_init__(self) -> None:
        if not 1 <= self.word_bits <= 64:
            raise ValueError(f"word_bits must be in 1..64, got {self.word_bits}")
        _check_rounding(self.rounding)
        if self.overflow not in OVERFLOW_MODES:
            raise ValueError(f"unknown overflow mode {self.overflow!r}")

    @property
    def raw_min(self) -> int:
        return -(1 << (self.word_bits - 1)) if self.signed else 0

    @property
    def raw_max(self) -> int:
        return (1 << (self.word_bits - 1)) - 1 if self.signed else (1 << self.word_bits) - 1

    def contains(self, raw: int) -> bool:
        return self.raw_min <= raw <= self.raw_max

    def to_real(self, raw: int) -> float:
        return raw * 2.0 ** (-self.frac_bits)


@dataclass(frozen=True)
class QuantParams:
    """Per-tensor affine quantization: real = (code - zero_point) * scale."""

    scale: float
    zero_point: int = 0
    bitwidth: int = 8
    signed: bool = True
    narrow: bool = False
    rounding: str = "half_even"

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not 1 <= self.bitwidth <= 32:
            raise ValueError(f"bitwidth must be in 1..32, got {self.bitwidth}")
        _check_rounding(self.rounding)
        if not self.qmin <= self.zero_point <= self.qmax:
            raise ValueError(
                f"zero_point {self.zero_point} outside [{self.qmin}, {self.qmax}]"
            )

    @property
    def qmin(self) -> int:
        if self.signed:
            return -(1 << (self.bitwidth - 1)) + (1 if self.narrow else 0)
        return 0

    @property
    def qmax(self) -> int:
        return (1 << (self.bitwidth - 1)) - 1 if self.signed else (1 << self.bitwidth) - 1

    def code_format(self) -> FxFormat:
        """Bit container carrying this tensor's codes on a stream."""
        return FxFormat(word_bits=self.bitwidth, frac_bits=0, signed=self.signed)


@dataclass(frozen=True)
class FxValue:
    """A raw code bound to its format."""

    raw: int
    format: FxFormat

    def __post_init__(self) -> None:
        if not self.format.contains(self.raw):
            raise CodeOutOfRange(
                f"raw {self.raw} outside [{self.format.raw_min}, {self.format.raw_max}]"
            )

    @property
    def real(self) -> float:
        return self.format.to_real(self.raw)


def round_to_int(x: float, mode: str = "half_even") -> int:
    """Round a real to an integer under the given mode; exact for ties.

    Uses Fraction so that values like 2.5 (exactly representable) take the
    tie path deterministically instead of drifting on float noise.
    """
    _check_rounding(mode)
    if mode == "floor":
        return math.floor(x)
    f = Fraction(x)
    fl = f.numerator // f.denominator
    rem = f - fl
    if rem > Fraction(1, 2):
        return fl + 1
    if rem < Fraction(1, 2):
        return fl
    if mode == "half_up":  # ties away from zero
        return fl + 1 if f >= 0 else fl
    return fl if fl % 2 == 0 else fl + 1


def rounding_rshift(x: int, shift: int, mode: str = "half_even") -> int:
    """Integer x * 2**-shift rounded; exact for any shift, any sign."""
    _check_rounding(mode)
    if shift <= 0:
        return x << (-shift)
    fl = x >> shift  # floor division
    rem = x - (fl << shift)
    half = 1 << (shift - 1)
    if mode == "floor":
        return fl
    if rem > half:
        return fl + 1
    if rem < half:
        return fl
    if mode == "half_up":
        return fl + 1 if x >= 0 else fl
    return fl if fl % 2 == 0 else fl + 1


def quantize(x: float, p: QuantParams) -> tuple[int, bool]:
    """Map a real to an integer code; returns (code, clipped).

    code = clip(round(x / scale) + zero_point, qmin, qmax).  Clipping is
    silent by contract; the flag is for diagnostics.
    """
    code = round_to_int(x / p.scale, p.rounding) + p.zero_point
    clipped = code < p.qmin or code > p.qmax
    return min(max(code, p.qmin), p.qmax), clipped


def dequantize(code: int, p: QuantParams) -> float:
    """Inverse map of quantize on the representable grid."""
    if not p.qmin <= code <= p.qmax:
        raise CodeOutOfRange(f"code {code} outside [{p.qmin}, {p.qmax}]")
    return (code - p.zero_point) * p.scale


def mac_format(a: FxFormat, w: FxFormat, n_terms: int) -> FxFormat:
    """Lossless accumulator format for a dot product of n_terms products.

    word = a.word + w.word + ceil(log2(n_terms)); frac adds; signed if
    either side is.  The result never rounds or saturates by construction.
    """
    if n_terms < 1:
        raise ValueError(f"n_terms must be >= 1, got {n_terms}")
    growth = (n_terms - 1).bit_length()  # ceil(log2(n)) for n >= 1
    word = a.word_bits + w.word_bits + growth
    if word > 64:
        raise WidthOverflow(f"accumulator of {word} bits exceeds the 64-bit limit")
    return FxFormat(
        word_bits=word,
        frac_bits=a.frac_bits + w.frac_bits,
        signed=a.signed or w.signed,
    )


@dataclass(frozen=True)
class QuantizedMultiplier:
    """A positive real factor rounded to mantissa * 2**-shift.

    The mantissa carries MULTIPLIER_BITS significant bits, mirroring the
    fixed-width multiplier a hardware requantizer would instantiate.  For
    factors whose mantissa already fits (all power-of-two scale ratios in
    particular) the representation is exact; otherwise the relative error
    is bounded by 2**-MULTIPLIER_BITS.
    """

    mantissa: int
    shift: int

    @classmethod
    def from_real(cls, value: float) -> "QuantizedMultiplier":
        if not value > 0:
            raise ValueError(f"multiplier must be positive, got {value}")
        frac, exp = math.frexp(value)  # value = frac * 2**exp, frac in [0.5, 1)
        mant = round_to_int(frac * (1 << MULTIPLIER_BITS), "half_even")
        if mant == 1 << MULTIPLIER_BITS:
            mant >>= 1
            exp += 1
        return cls(mantissa=mant, shift=MULTIPLIER_BITS - exp)

    @property
    def exact_value(self) -> Fraction:
        return Fraction(self.mantissa, 1) / Fraction(2) ** self.shift

    def apply(self, x: int, rounding: str = "half_even") -> int:
        """round(x * multiplier) in pure integer arithmetic."""
        return rounding_rshift(x * self.mantissa, self.shift, rounding)


def requantize(acc: int, in_scale: float, p_out: QuantParams) -> int:
    """Rescale a lossless accumulator (real value acc * in_scale) to p_out.

    Equals quantize(acc * in_scale, p_out) whenever the scale ratio is
    representable with MULTIPLIER_BITS of mantissa; the integer path and its
    clipping are the binding definition either way.
    """
    mult = QuantizedMultiplier.from_real(in_scale / p_out.scale)
    code = mult.apply(acc, p_out.rounding) + p_out.zero_point
    return min(max(code, p_out.qmin), p_out.qmax)


def convert(value: FxValue, fmt: FxFormat) -> FxValue:
    """Re-represent a fixed-point value in another format.

    Fractional bits are dropped with fmt.rounding; out-of-range results
    follow fmt.overflow (saturate or wrap).
    """
    raw = value.raw
    shift = value.format.frac_bits - fmt.frac_bits
    raw = rounding_rshift(raw, shift, fmt.rounding) if shift > 0 else raw << (-shift)
    if not fmt.contains(raw):
        if fmt.overflow == "saturate":
            raw = min(max(raw, fmt.raw_min), fmt.raw_max)
        else:
            span = 1 << fmt.word_bits
            raw = raw & (span - 1)
            if fmt.signed and raw > fmt.raw_max:
                raw -= span
    return FxValue(raw=raw, format=fmt)


def widen(fmt: FxFormat, other: FxFormat) -> FxFormat:
    """Smallest common format both inputs convert into losslessly."""
    signed = fmt.signed or other.signed
    frac = max(fmt.frac_bits, other.frac_bits)

    def int_bits(f: FxFormat) -> int:
        return f.word_bits - f.frac_bits - (1 if f.signed else 0)

    word = max(int_bits(fmt), int_bits(other)) + frac + (1 if signed else 0)
    if word > 64:
        raise WidthOverflow(f"widened format of {word} bits exceeds the 64-bit limit")
    return replace(fmt, word_bits=word, frac_bits=frac, signed=signed)
