"""Seeded generators of finite values, biased toward the awkward corners."""

from __future__ import annotations

import random

from .fpcore import FloatFormat, FpValue, from_exact, neg, next_down, next_up, omega


def random_finite(rng: random.Random, fmt: FloatFormat) -> FpValue:
    """Uniform over finite bit patterns."""
    biased = rng.randrange(fmt.exp_all_ones)
    frac = rng.getrandbits(fmt.p)
    sign = rng.getrandbits(1)
    return FpValue((sign << (fmt.width - 1)) | (biased << fmt.p) | frac, fmt)


def near_omega(rng: random.Random, fmt: FloatFormat) -> FpValue:
    v = omega(fmt)
    for _ in range(rng.randint(0, 3)):
        v = next_up(v) if rng.getrandbits(1) else next_down(v)
    return neg(v) if rng.random() < 0.25 else v


def small_int(rng: random.Random, fmt: FloatFormat) -> FpValue:
    return from_exact(rng.randint(-8, 8), fmt)


def near_subnormal(rng: random.Random, fmt: FloatFormat) -> FpValue:
    bits = rng.randrange(1, 1 << (fmt.p + 2))
    return FpValue(bits | (rng.getrandbits(1) << (fmt.width - 1)), fmt)


def tie_pair(rng: random.Random, fmt: FloatFormat) -> tuple[FpValue, FpValue]:
    """``a`` large and ``b`` exactly half an ulp of ``a`` (or an odd multiple of it)."""
    e = rng.randint(fmt.p + 1, fmt.p + 40)
    mant = rng.randrange(1 << fmt.p, 1 << (fmt.p + 1))
    a = from_exact(mant * 2 ** (e - fmt.p), fmt)
    b = from_exact((2 * rng.randint(0, 3) + 1) * 2 ** (e - fmt.p - 1), fmt)
    if rng.getrandbits(1):
        b = neg(b)
    return a, b


def adversarial_pair(rng: random.Random, fmt: FloatFormat) -> tuple[FpValue, FpValue]:
    kind = rng.randrange(6)
    if kind == 0:
        return random_finite(rng, fmt), random_finite(rng, fmt)
    if kind == 1:
        return near_omega(rng, fmt), small_int(rng, fmt)
    if kind == 2:
        return near_subnormal(rng, fmt), near_subnormal(rng, fmt)
    if kind == 3:
        return tie_pair(rng, fmt)
    if kind == 4:
        a = random_finite(rng, fmt)
        # close exponents: catastrophic cancellation and carries
        b = FpValue(a.bits ^ rng.getrandbits(fmt.p // 2) ^ (rng.getrandbits(1) << (fmt.width - 1)), fmt)
        return a, b
    return near_omega(rng, fmt), near_omega(rng, fmt)


def summand(rng: random.Random, fmt: FloatFormat) -> FpValue:
    """Values near omega and near 1, where summation order matters most."""
    r = rng.random()
    if r < 0.3:
        return near_omega(rng, fmt)
    if r < 0.8:
        return from_exact(rng.choice([1, 2, 3, 1.25, 1.5, 0.5, 0.75, 5, -1, -2]), fmt)
    return small_int(rng, fmt)
