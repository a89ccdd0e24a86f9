"""Bit-exact IEEE-754 binary32/binary64 addition under the four rounding modes.

Values are explicit bit patterns tagged with their format. Arithmetic is done
on Python integers, so nothing here touches the process floating-point
environment and every function is pure.

Two independent rounding paths exist on purpose:

* ``add`` aligns the integer significands exactly and rounds the resulting
  dyadic number with shifts and a sticky remainder.
* ``round_exact`` rounds an arbitrary ``Fraction`` with rational floor
  division. It is the validation oracle for ``add``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .errors import FloatOverflowError, FormatMismatchError, RepresentationError

ExactValue = Fraction


class FloatFormat(enum.Enum):
    BINARY32 = ("b32", 23, 8)
    BINARY64 = ("b64", 52, 11)

    def __init__(self, tag: str, p: int, exponent_bits: int) -> None:
        self.tag = tag
        self.p = p  # stored fraction bits; precision is p + 1
        self.exponent_bits = exponent_bits
        # derived constants are plain attributes: they sit on the hot path of add()
        self.width = 1 + exponent_bits + p
        self.bias = (1 << (exponent_bits - 1)) - 1
        self.emin = 1 - self.bias
        self.emax = self.bias
        self.sign_mask = 1 << (self.width - 1)
        self.exp_all_ones = (1 << exponent_bits) - 1

    @classmethod
    def from_tag(cls, tag: str) -> FloatFormat:
        for fmt in cls:
            if tag.lower() in (fmt.tag, fmt.name.lower()):
                return fmt
        raise ValueError(f"unknown float format {tag!r}")

    def __repr__(self) -> str:
        return f"FloatFormat.{self.name}"


class RoundingMode(enum.Enum):
    NEAREST_EVEN = "ne"
    TOWARD_NEG_INF = "rd"
    TOWARD_POS_INF = "ru"
    TOWARD_ZERO = "rz"

    @classmethod
    def from_tag(cls, tag: str) -> RoundingMode:
        for mode in cls:
            if tag.lower() in (mode.value, mode.name.lower()):
                return mode
        raise ValueError(f"unknown rounding mode {tag!r}")

    def __repr__(self) -> str:
        return f"RoundingMode.{self.name}"


B32 = FloatFormat.BINARY32
B64 = FloatFormat.BINARY64
NE = RoundingMode.NEAREST_EVEN
RD = RoundingMode.TOWARD_NEG_INF
RU = RoundingMode.TOWARD_POS_INF
RZ = RoundingMode.TOWARD_ZERO
ALL_MODES = (NE, RD, RU, RZ)


@dataclass(frozen=True)
class FpValue:
    """A finite floating-point number stored as its raw bit pattern."""

    bits: int
    fmt: FloatFormat

    def __post_init__(self) -> None:
        if not 0 <= self.bits < (1 << self.fmt.width):
            raise ValueError(f"bit pattern {self.bits:#x} does not fit {self.fmt.tag}")
        if (self.bits >> self.fmt.p) & self.fmt.exp_all_ones == self.fmt.exp_all_ones:
            raise RepresentationError("NaN and infinities are outside the laboratory domain")
        if self.bits == self.fmt.sign_mask:
            object.__setattr__(self, "bits", 0)  # -0 -> +0

    @cached_property
    def exact(self) -> Fraction:
        sign, mant, qexp = decompose(self)
        value = Fraction(mant) * Fraction(2) ** qexp
        return -value if sign else value

    @property
    def is_zero(self) -> bool:
        return self.bits == 0

    @property
    def negative(self) -> bool:
        return bool(self.bits & self.fmt.sign_mask)

    def __lt__(self, other: FpValue) -> bool:
        return self.exact < other.exact

    def __le__(self, other: FpValue) -> bool:
        return self.exact <= other.exact

    def __gt__(self, other: FpValue) -> bool:
        return self.exact > other.exact

    def __ge__(self, other: FpValue) -> bool:
        return self.exact >= other.exact

    def __neg__(self) -> FpValue:
        return neg(self)

    def __float__(self) -> float:
        return float(self.exact)

    def __repr__(self) -> str:
        return f"FpValue({to_literal(self)}, {self.fmt.tag})"

    def to_json(self) -> dict:
        digits = self.fmt.width // 4
        return {"format": self.fmt.tag, "bits": f"0x{self.bits:0{digits}x}"}

    @classmethod
    def from_json(cls, obj: dict) -> FpValue:
        return cls(int(obj["bits"], 16), FloatFormat.from_tag(obj["format"]))


def decompose(a: FpValue) -> tuple[int, int, int]:
    """Split ``a`` into ``(sign, significand, exponent)`` with value ``±sig * 2**exp``."""
    fmt = a.fmt
    sign = a.bits >> (fmt.width - 1)
    biased = (a.bits >> fmt.p) & fmt.exp_all_ones
    frac = a.bits & ((1 << fmt.p) - 1)
    if biased == 0:
        return sign, frac, fmt.emin - fmt.p
    return sign, frac | (1 << fmt.p), biased - fmt.bias - fmt.p


def _encode(sign: int, mag: int, qexp: int, fmt: FloatFormat) -> FpValue:
    # mag * 2**qexp with qexp >= emin - p; mag may be 2**(p+1) after a carry.
    if mag == 0:
        return FpValue(0, fmt)
    while mag >= (1 << (fmt.p + 1)):
        if mag & 1:
            raise AssertionError("encoding would lose bits")
        mag >>= 1
        qexp += 1
    if mag < (1 << fmt.p):
        if qexp != fmt.emin - fmt.p:
            # normalise a small significand upward where the exponent allows
            while mag < (1 << fmt.p) and qexp > fmt.emin - fmt.p:
                mag <<= 1
                qexp -= 1
        if mag < (1 << fmt.p):
            return FpValue((sign << (fmt.width - 1)) | mag, fmt)
    biased = qexp + fmt.p + fmt.bias
    if biased >= fmt.exp_all_ones:
        raise FloatOverflowError(f"result exceeds the largest finite {fmt.tag} value")
    bits = (sign << (fmt.width - 1)) | (biased << fmt.p) | (mag - (1 << fmt.p))
    return FpValue(bits, fmt)


def _rounds_up(mode: RoundingMode, sign: int, below_half: bool, is_half: bool, lsb: int,
               inexact: bool) -> bool:
    """Whether the truncated magnitude must be incremented."""
    if not inexact:
        return False
    if mode is NE:
        return not below_half and (not is_half or lsb == 1)
    if mode is RZ:
        return False
    if mode is RU:
        return sign == 0
    return sign == 1  # RD


def _round_dyadic(sign: int, n: int, e: int, fmt: FloatFormat, mode: RoundingMode) -> FpValue:
    """Round the exact value ``±n * 2**e`` (``n > 0``) into ``fmt``."""
    lead = n.bit_length() - 1 + e
    qexp = max(lead, fmt.emin) - fmt.p
    shift = qexp - e
    if shift <= 0:
        return _encode(sign, n << -shift, qexp, fmt)
    mag = n >> shift
    rem = n & ((1 << shift) - 1)
    half = 1 << (shift - 1)
    if _rounds_up(mode, sign, rem < half, rem == half, mag & 1, rem != 0):
        mag += 1
    return _encode(sign, mag, qexp, fmt)


def round_exact(q: Fraction | int, fmt: FloatFormat, mode: RoundingMode) -> FpValue:
    """Round an exact rational to the nearest value of ``fmt`` allowed by ``mode``."""
    q = Fraction(q)
    if q == 0:
        return FpValue(0, fmt)
    sign = 1 if q < 0 else 0
    a = -q if sign else q
    lead = a.numerator.bit_length() - a.denominator.bit_length()
    if a < Fraction(2) ** lead:
        lead -= 1
    qexp = max(lead, fmt.emin) - fmt.p
    scaled = a / Fraction(2) ** qexp
    mag = scaled.numerator // scaled.denominator
    rem = scaled - mag
    if _rounds_up(mode, sign, rem < Fraction(1, 2), rem == Fraction(1, 2), mag & 1, rem != 0):
        mag += 1
    return _encode(sign, mag, qexp, fmt)


def add(a: FpValue, b: FpValue, mode: RoundingMode) -> FpValue:
    """IEEE-754 addition ``a + b`` rounded once under ``mode``."""
    if a.fmt is not b.fmt:
        raise FormatMismatchError(f"cannot add {a.fmt.tag} and {b.fmt.tag}")
    sa, ma, ea = decompose(a)
    sb, mb, eb = decompose(b)
    e = min(ea, eb)
    total = (-ma if sa else ma) << (ea - e)
    total += (-mb if sb else mb) << (eb - e)
    if total == 0:
        return FpValue(0, a.fmt)
    if total < 0:
        return _round_dyadic(1, -total, e, a.fmt, mode)
    return _round_dyadic(0, total, e, a.fmt, mode)


def mul(a: FpValue, b: FpValue, mode: RoundingMode) -> FpValue:
    """Product rounded once; only used for neuron inputs times weights."""
    if a.fmt is not b.fmt:
        raise FormatMismatchError(f"cannot multiply {a.fmt.tag} and {b.fmt.tag}")
    sa, ma, ea = decompose(a)
    sb, mb, eb = decompose(b)
    if ma == 0 or mb == 0:
        return FpValue(0, a.fmt)
    return _round_dyadic(sa ^ sb, ma * mb, ea + eb, a.fmt, mode)


def sub(a: FpValue, b: FpValue, mode: RoundingMode) -> FpValue:
    return add(a, neg(b), mode)


def neg(a: FpValue) -> FpValue:
    if a.is_zero:
        return a
    return FpValue(a.bits ^ a.fmt.sign_mask, a.fmt)


def _order_key(a: FpValue) -> int:
    if a.negative:
        return -(a.bits ^ a.fmt.sign_mask)
    return a.bits


def _from_order_key(key: int, fmt: FloatFormat) -> FpValue:
    if key < 0:
        return FpValue((-key) | fmt.sign_mask, fmt)
    return FpValue(key, fmt)


def next_up(a: FpValue) -> FpValue:
    key = _order_key(a) + 1
    if key == (a.fmt.exp_all_ones << a.fmt.p):
        raise FloatOverflowError("no finite value above the largest finite value")
    return _from_order_key(key, a.fmt)


def next_down(a: FpValue) -> FpValue:
    key = _order_key(a) - 1
    if key == -(a.fmt.exp_all_ones << a.fmt.p):
        raise FloatOverflowError("no finite value below the most negative finite value")
    return _from_order_key(key, a.fmt)


def omega(fmt: FloatFormat) -> FpValue:
    """Smallest positive value whose successor is two above it: 2**(p+1)."""
    return from_exact(Fraction(2) ** (fmt.p + 1), fmt)


def min_subnormal(fmt: FloatFormat) -> FpValue:
    return FpValue(1, fmt)


def max_finite(fmt: FloatFormat) -> FpValue:
    return FpValue(((fmt.exp_all_ones - 1) << fmt.p) | ((1 << fmt.p) - 1), fmt)


def from_exact(q: Fraction | int, fmt: FloatFormat) -> FpValue:
    """Encode ``q`` exactly; raise ``RepresentationError`` instead of rounding."""
    q = Fraction(q)
    try:
        down = round_exact(q, fmt, RD)
    except FloatOverflowError as exc:
        raise RepresentationError(f"{q} is outside the finite {fmt.tag} range") from exc
    if down.exact != q:
        raise RepresentationError(f"{q} is not representable in {fmt.tag}")
    return down


def convert(a: FpValue, fmt: FloatFormat) -> FpValue:
    """Re-encode ``a`` in another format, refusing any lossy conversion."""
    if a.fmt is fmt:
        return a
    return from_exact(a.exact, fmt)


def fp(x: int | float | str | Fraction | FpValue, fmt: FloatFormat = B64) -> FpValue:
    """Convenience constructor accepting ints, floats, fractions or literals."""
    if isinstance(x, FpValue):
        return convert(x, fmt)
    if isinstance(x, str):
        return parse_literal(x, fmt)
    return from_exact(Fraction(x), fmt)


# -- literals ---------------------------------------------------------------

_TERM = re.compile(
    r"""\s*(?P<sign>[+-])?\s*
    (?:
        2\s*\^\s*\(?(?P<pexp>[+-]?\d+)\)?
      | (?P<coef>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
        (?:\s*\*\s*2\s*\^\s*\(?(?P<bexp>[+-]?\d+)\)?)?
    )\s*""",
    re.X,
)


def parse_exact(text: str) -> Fraction:
    """Parse a decimal or dyadic literal such as ``1.25``, ``3*2^-4`` or ``2^53-1``."""
    pos, total, first = 0, Fraction(0), True
    text = text.strip()
    if not text:
        raise ValueError("empty numeric literal")
    while pos < len(text):
        m = _TERM.match(text, pos)
        if m is None or m.end() == pos or (not first and m.group("sign") is None):
            raise ValueError(f"cannot parse numeric literal {text!r}")
        if m.group("pexp") is not None:
            term = Fraction(2) ** int(m.group("pexp"))
        else:
            term = Fraction(m.group("coef"))
            if m.group("bexp") is not None:
                term *= Fraction(2) ** int(m.group("bexp"))
        total += -term if m.group("sign") == "-" else term
        pos, first = m.end(), False
    return total


def parse_literal(text: str, fmt: FloatFormat) -> FpValue:
    return from_exact(parse_exact(text), fmt)


def format_exact(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    k = q.denominator.bit_length() - 1
    if q.denominator != 1 << k:
        return str(q)
    return f"{q.numerator}*2^-{k}"


def format_readable(q: Fraction) -> str:
    """Like :func:`format_exact`, but large integers near a power of two print
    as ``2^k+d`` (``2^53+2`` rather than ``9007199254740994``)."""
    q = Fraction(q)
    if q.denominator != 1 or abs(q) < 1 << 16:
        return format_exact(q)
    mag = abs(q.numerator)
    k = min((mag.bit_length() - 1, mag.bit_length()), key=lambda e: abs(mag - (1 << e)))
    d = mag - (1 << k)
    if abs(d) > 1 << 12:
        return format_exact(q)
    sign = "-" if q < 0 else ""
    d = -d if q < 0 else d
    return f"{sign}2^{k}" + (f"{d:+d}" if d else "")


def to_literal(a: FpValue) -> str:
    """Lossless human-readable literal (integer or ``n*2^-k`` with ``n`` odd)."""
    return format_exact(a.exact)
