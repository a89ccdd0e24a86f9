"""Exact reachable output sets of a floating-point sum over all expression trees.

``reach(S)`` for a collection ``S`` of summands is ``{x}`` for a single leaf and
otherwise the set of ``add(a, b)`` over every unordered split of ``S`` into two
non-empty parts with ``a``/``b`` reachable from the parts. Addition is
commutative, so unordered splits suffice.

The table is keyed by sub-multisets rather than index subsets: two subsets
holding the same values reach the same outputs. With pairwise distinct
summands this is the plain 3^n subset DP; with repeated summands (detector
weights) it is far smaller.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .errors import EmptyInputError, FormatMismatchError, SizeLimitError
from .exprtree import ExprTree, Leaf, Node
from .fpcore import FloatFormat, FpValue, RoundingMode, add

DEFAULT_LIMIT = 14
NAIVE_LIMIT = 6
LIMIT_ENV = "FPGAUNTLET_ORACLE_LIMIT"


def oracle_limit() -> int:
    raw = os.environ.get(LIMIT_ENV)
    return int(raw) if raw else DEFAULT_LIMIT


@dataclass(frozen=True)
class ReachableSet:
    values: frozenset[FpValue]
    n: int
    mode: RoundingMode
    fmt: FloatFormat
    _table: dict = field(repr=False, compare=False, hash=False)
    _pools: tuple = field(repr=False, compare=False, hash=False)
    _units: dict = field(repr=False, compare=False, hash=False)
    _full: int = field(repr=False, compare=False, hash=False)

    def sorted(self) -> list[FpValue]:
        return sorted(self.values, key=lambda v: v.exact)

    def __contains__(self, v: FpValue) -> bool:
        return v in self.values

    def __len__(self) -> int:
        return len(self.values)

    def witness(self, value: FpValue) -> ExprTree:
        """A tree over the original leaf indices that evaluates to ``value``."""
        if value not in self.values:
            raise KeyError(value)
        avail = [list(p) for p in self._pools]
        return _rebuild(self._table, self._units, self._full, value, avail)


@dataclass(frozen=True)
class Extremes:
    lo: FpValue
    hi: FpValue
    min_witness: ExprTree
    max_witness: ExprTree

    @property
    def L_r(self) -> FpValue:
        return self.lo

    @property
    def U_r(self) -> FpValue:
        return self.hi


class _Shape:
    """Mixed-radix indexing of sub-multisets given per-value multiplicities."""

    def __init__(self, counts: Sequence[int]) -> None:
        self.counts = tuple(counts)
        self.radix = []
        r = 1
        for c in self.counts:
            self.radix.append(r)
            r *= c + 1
        self.total = r

    def index(self, vec: Sequence[int]) -> int:
        return sum(k * r for k, r in zip(vec, self.radix))

    def vector(self, idx: int) -> tuple[int, ...]:
        return tuple((idx // r) % (c + 1) for r, c in zip(self.radix, self.counts))


def _rebuild(table, units, state, value, avail) -> ExprTree:
    back = table[state][value]
    if back is None:
        return Leaf(avail[units[state]].pop(0))
    left, a, right, b = back
    return Node(_rebuild(table, units, left, a, avail), _rebuild(table, units, right, b, avail))


def _prepare(values: Sequence[FpValue], limit: int | None) -> None:
    if not values:
        raise EmptyInputError("the oracle needs at least one summand")
    if limit is None:
        limit = oracle_limit()
    if limit and len(values) > limit:
        raise SizeLimitError(
            f"{len(values)} summands exceed the oracle limit {limit}; scan order policies instead"
        )
    fmt = values[0].fmt
    if any(v.fmt is not fmt for v in values):
        raise FormatMismatchError("all summands must share one format")


def reachable_values(values: Sequence[FpValue], mode: RoundingMode,
                     limit: int | None = None) -> ReachableSet:
    """Every output some binary tree over ``values`` can produce under ``mode``.

    ``limit`` caps the summand count (default 14, overridable through the
    ``FPGAUNTLET_ORACLE_LIMIT`` environment variable); pass ``0`` to disable.
    """
    _prepare(values, limit)
    fmt = values[0].fmt
    distinct: dict[FpValue, list[int]] = {}
    for i, v in enumerate(values):
        distinct.setdefault(v, []).append(i)
    keys = list(distinct)
    pools = tuple(tuple(distinct[k]) for k in keys)
    shape = _Shape([len(p) for p in pools])

    table: dict[int, dict] = {}
    units: dict[int, int] = {}
    by_size: dict[int, list[int]] = {}
    for idx in range(1, shape.total):
        by_size.setdefault(sum(shape.vector(idx)), []).append(idx)
    for d, key in enumerate(keys):
        unit = shape.radix[d]
        table[unit] = {key: None}
        units[unit] = d

    memo: dict[tuple[FpValue, FpValue], FpValue] = {}
    for size in range(2, len(values) + 1):
        for idx in by_size.get(size, ()):
            vec = shape.vector(idx)
            out: dict[FpValue, tuple | None] = {}
            for sub in itertools.product(*(range(k + 1) for k in vec)):
                left = shape.index(sub)
                right = idx - left
                if left == 0 or right == 0 or left > right:
                    continue
                for a in table[left]:
                    for b in table[right]:
                        r = memo.get((a, b))
                        if r is None:
                            r = add(a, b, mode)
                            memo[(a, b)] = memo[(b, a)] = r
                        if r not in out:
                            out[r] = (left, a, right, b)
            table[idx] = out
    full = shape.total - 1
    return ReachableSet(frozenset(table[full]), len(values), mode, fmt, table, pools, units, full)


def extremes(values: Sequence[FpValue], mode: RoundingMode, limit: int | None = None) -> Extremes:
    reach = reachable_values(values, mode, limit)
    ordered = reach.sorted()
    lo, hi = ordered[0], ordered[-1]
    return Extremes(lo, hi, reach.witness(lo), reach.witness(hi))


# -- naive enumeration --------------------------------------------------------


def count_trees(n: int) -> int:
    """Number of ordered binary trees with ``n`` labelled leaves: (2n-2)!/(n-1)!."""
    return math.factorial(2 * n - 2) // math.factorial(n - 1)


def _shapes(lo: int, hi: int) -> Iterator[ExprTree]:
    if hi - lo == 1:
        yield Leaf(lo)
        return
    for cut in range(lo + 1, hi):
        for left in _shapes(lo, cut):
            for right in _shapes(cut, hi):
                yield Node(left, right)


def _relabel(tree: ExprTree, perm: Sequence[int]) -> ExprTree:
    if isinstance(tree, Leaf):
        return Leaf(perm[tree.index])
    return Node(_relabel(tree.left, perm), _relabel(tree.right, perm))


def enumerate_all_trees(n: int) -> Iterator[ExprTree]:
    """Every tree shape combined with every leaf permutation (naive oracle)."""
    if n < 1:
        raise EmptyInputError("n must be positive")
    if n > NAIVE_LIMIT:
        raise SizeLimitError(f"naive enumeration is capped at n = {NAIVE_LIMIT}")
    shapes = list(_shapes(0, n))
    for perm in itertools.permutations(range(n)):
        for shape in shapes:
            yield _relabel(shape, perm)
