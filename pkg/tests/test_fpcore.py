import random
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpgauntlet.errors import FloatOverflowError, FormatMismatchError, RepresentationError
from fpgauntlet.fpcore import (
    ALL_MODES,
    B32,
    B64,
    NE,
    RD,
    RU,
    RZ,
    FpValue,
    add,
    convert,
    fp,
    max_finite,
    min_subnormal,
    neg,
    next_down,
    next_up,
    omega,
    parse_exact,
    parse_literal,
    round_exact,
    sub,
    to_literal,
)
from fpgauntlet.sampling import adversarial_pair, random_finite

W64 = Fraction(2) ** 53


def finite_values(fmt):
    return st.builds(lambda s: random_finite(random.Random(s), fmt), st.integers(0, 2**64))


# -- formats --------------------------------------------------------------------


@pytest.mark.parametrize("fmt,p,ebits", [(B32, 23, 8), (B64, 52, 11)])
def test_format_constants(fmt, p, ebits):
    assert fmt.p == p and fmt.exponent_bits == ebits
    assert omega(fmt).exact == 2 ** (p + 1)
    assert min_subnormal(fmt).exact > 0
    assert next_down(min_subnormal(fmt)).is_zero


def test_omega_values():
    assert omega(B32).exact == 2**24
    assert omega(B64).exact == 2**53


def test_min_subnormal_from_encoding():
    # bit pattern 1: zero biased exponent, lowest fraction bit -> 2^(emin - p)
    assert min_subnormal(B64).exact == Fraction(1, 2**1074)
    assert min_subnormal(B32).exact == Fraction(1, 2**149)


# -- round_exact ----------------------------------------------------------------


def test_round_exact_examples():
    assert round_exact(W64 + 1, B64, NE).exact == W64
    assert round_exact(W64 + 1, B64, RU).exact == W64 + 2
    for fmt in (B32, B64):
        for mode in ALL_MODES:
            assert round_exact(0, fmt, mode) == FpValue(0, fmt)


@settings(max_examples=300)
@given(st.fractions(min_value=-(2**60), max_value=2**60), st.sampled_from([B32, B64]))
def test_directed_modes_never_cross(q, fmt):
    lo = round_exact(q, fmt, RD).exact
    hi = round_exact(q, fmt, RU).exact
    tz = round_exact(q, fmt, RZ).exact
    ne = round_exact(q, fmt, NE).exact
    assert lo <= q <= hi
    assert abs(tz) <= abs(q)
    assert ne in (lo, hi)
    if lo != hi:
        assert next_up(round_exact(q, fmt, RD)).exact == hi


def test_round_exact_overflow():
    huge = max_finite(B32).exact * 2
    with pytest.raises(FloatOverflowError):
        round_exact(huge, B32, NE)
    with pytest.raises(OverflowError):
        round_exact(-huge, B32, RD)


# -- add --------------------------------------------------------------------------


def test_add_examples():
    w, one = omega(B64), fp(1)
    assert add(w, one, RD) == w
    assert add(fp(2**24, B32), fp(1, B32), NE).exact == 2**24
    assert add(fp(2**24), fp(1), NE).exact == 2**24 + 1


@given(finite_values(B64), st.sampled_from(ALL_MODES))
def test_zero_is_identity(x, mode):
    assert add(x, FpValue(0, B64), mode) == x


def test_ties_to_even():
    w = omega(B64)
    assert add(w, fp(1), NE) == w
    assert add(next_up(w), fp(1), NE).exact == W64 + 4


@pytest.mark.parametrize("fmt", [B32, B64])
def test_add_matches_round_exact_on_adversarial_pairs(fmt):
    rng = random.Random(2024)
    for _ in range(3000):
        a, b = adversarial_pair(rng, fmt)
        for mode in ALL_MODES:
            try:
                got = add(a, b, mode)
            except FloatOverflowError:
                with pytest.raises(FloatOverflowError):
                    round_exact(a.exact + b.exact, fmt, mode)
                continue
            assert got == round_exact(a.exact + b.exact, fmt, mode)
            assert got == add(b, a, mode)


def _hw32(a: FpValue, b: FpValue) -> int:
    x = np.frombuffer(struct.pack("<I", a.bits), dtype=np.float32)[0]
    y = np.frombuffer(struct.pack("<I", b.bits), dtype=np.float32)[0]
    with np.errstate(over="ignore"):
        return struct.unpack("<I", np.float32(x + y).tobytes())[0]


def _hw64(a: FpValue, b: FpValue) -> int:
    x = struct.unpack("<d", struct.pack("<Q", a.bits))[0]
    y = struct.unpack("<d", struct.pack("<Q", b.bits))[0]
    return struct.unpack("<Q", struct.pack("<d", x + y))[0]


@pytest.mark.parametrize("fmt,hw", [(B32, _hw32), (B64, _hw64)])
def test_nearest_even_agrees_with_hardware(fmt, hw):
    rng = random.Random(7)
    for _ in range(3000):
        a, b = adversarial_pair(rng, fmt)
        try:
            got = add(a, b, NE)
        except FloatOverflowError:
            continue
        expect = hw(a, b)
        if expect == fmt.sign_mask:
            expect = 0
        assert got.bits == expect


@settings(max_examples=300)
@given(st.data(), st.sampled_from([B32, B64]))
def test_mode_ordering(data, fmt):
    a = data.draw(finite_values(fmt))
    b = data.draw(finite_values(fmt))
    try:
        lo, ne, hi, tz = (add(a, b, m) for m in (RD, NE, RU, RZ))
    except FloatOverflowError:
        return
    assert lo <= ne <= hi
    exact = a.exact + b.exact
    representable = lo.exact == exact
    assert (lo == hi) == representable
    if exact >= 0:
        assert tz == lo
    if exact <= 0:
        assert tz == hi


def test_add_errors():
    with pytest.raises(FormatMismatchError):
        add(fp(1, B32), fp(1, B64), NE)
    with pytest.raises(FloatOverflowError):
        add(max_finite(B64), max_finite(B64), NE)


def test_add_is_thread_deterministic():
    rng = random.Random(5)
    pairs = [adversarial_pair(rng, B64) for _ in range(500)]

    def run(_):
        out = []
        for a, b in pairs:
            try:
                out.append(add(a, b, NE).bits)
            except FloatOverflowError:
                out.append(None)
        return out

    with ThreadPoolExecutor(4) as pool:
        results = list(pool.map(run, range(4)))
    assert all(r == results[0] for r in results)
    assert threading.active_count() >= 1


# -- neighbours -------------------------------------------------------------------


def test_next_up_down_examples():
    w = omega(B64)
    assert next_up(w).exact == W64 + 2
    assert next_down(w).exact == W64 - 1
    assert next_up(FpValue(0, B64)) == min_subnormal(B64)


@given(finite_values(B32))
def test_next_roundtrip(a):
    try:
        assert next_down(next_up(a)) == a
    except FloatOverflowError:
        assert a == max_finite(B32)


def test_next_overflow():
    with pytest.raises(FloatOverflowError):
        next_up(max_finite(B64))
    with pytest.raises(FloatOverflowError):
        next_down(neg(max_finite(B64)))


# -- ingestion and serialization ---------------------------------------------------


def test_rejects_nan_and_infinity():
    with pytest.raises(RepresentationError):
        FpValue(0x7F800000, B32)
    with pytest.raises(RepresentationError):
        FpValue(0x7FF8000000000000, B64)


def test_negative_zero_normalized():
    assert FpValue(0x80000000, B32).bits == 0
    assert sub(fp(3), fp(3), RD).bits == 0


@given(finite_values(B64))
def test_json_roundtrip(a):
    assert FpValue.from_json(a.to_json()) == a
    assert parse_literal(to_literal(a), B64) == a


def test_literals():
    assert parse_exact("2^53-1") == W64 - 1
    assert parse_exact("-3*2^-2") == Fraction(-3, 4)
    assert parse_exact("1.25") == Fraction(5, 4)
    assert parse_exact("2^53 + 2") == W64 + 2
    assert to_literal(fp(0.75)) == "3*2^-2"
    with pytest.raises(RepresentationError):
        parse_literal("0.1", B64)
    with pytest.raises(RepresentationError):
        parse_literal("2^24+1", B32)
    with pytest.raises(ValueError):
        parse_exact("1..2")


def test_convert_is_lossless_or_fails():
    assert convert(fp(2**53), B32).exact == 2**53
    with pytest.raises(RepresentationError):
        convert(fp(2**53 + 2), B32)
