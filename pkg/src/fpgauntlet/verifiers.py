"""Interval, zonotope-widening and symbolic-sum bounds, and the soundness judge.

The verifiers compute in floating point themselves: interval endpoints are
``FpValue`` objects of the verifier's own format and every bound operation
uses a directed rounding mode, so the verifier is bit-deterministic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .errors import ArityError, FormatMismatchError, SizeLimitError
from .exprtree import (
    AllTrees,
    Environment,
    ExprTree,
    Leaf,
    LeftToRight,
    Node,
    OrderPolicy,
    build_tree,
    evaluate,
)
from .fpcore import RD, RU, FloatFormat, FpValue, add, convert, min_subnormal, round_exact
from .oracle import oracle_limit, reachable_values


@dataclass(frozen=True)
class Interval:
    lo: FpValue
    hi: FpValue

    def __post_init__(self) -> None:
        if self.lo.fmt is not self.hi.fmt:
            raise FormatMismatchError("interval endpoints must share one format")
        if self.hi < self.lo:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def fmt(self) -> FloatFormat:
        return self.lo.fmt

    @property
    def width(self) -> Fraction:
        return self.hi.exact - self.lo.exact

    def contains(self, x: FpValue | Fraction) -> bool:
        q = x.exact if isinstance(x, FpValue) else x
        return self.lo.exact <= q <= self.hi.exact

    def contains_interval(self, other: Interval) -> bool:
        return self.lo.exact <= other.lo.exact and other.hi.exact <= self.hi.exact

    def strictly_contains(self, other: Interval) -> bool:
        return self.lo.exact < other.lo.exact and other.hi.exact < self.hi.exact

    @classmethod
    def point(cls, x: FpValue) -> Interval:
        return cls(x, x)


def _check_inputs(tree: ExprTree, values: Sequence[FpValue], fmt: FloatFormat) -> list[FpValue]:
    if tree.size != len(values):
        raise ArityError(f"tree has {tree.size} leaves but {len(values)} summands were given")
    return [convert(v, fmt) for v in values]


def _propagate(tree: ExprTree, leaves: Sequence[FpValue], combine) -> Interval:
    # iterative post-order, deep chains must not hit the recursion limit
    out: list[Interval] = []
    stack: list[tuple[ExprTree, bool]] = [(tree, False)]
    while stack:
        t, expanded = stack.pop()
        if isinstance(t, Leaf):
            out.append(Interval.point(leaves[t.index]))
        elif expanded:
            b = out.pop()
            a = out.pop()
            out.append(combine(a, b))
        else:
            stack.append((t, True))
            stack.append((t.right, False))
            stack.append((t.left, False))
    return out[0]


def _ibp_add(a: Interval, b: Interval) -> Interval:
    return Interval(add(a.lo, b.lo, RD), add(a.hi, b.hi, RU))


def ibp_eval(tree: ExprTree, values: Sequence[FpValue], fmt: FloatFormat) -> Interval:
    """Interval bound propagation along ``tree`` computed in ``fmt``."""
    return _propagate(tree, _check_inputs(tree, values, fmt), _ibp_add)


def rounding_error_radius(iv: Interval) -> FpValue:
    """``max(|lo|, |hi|) * 2^-p``, rounded upward if the scaling underflows."""
    fmt = iv.fmt
    mag = max(abs(iv.lo.exact), abs(iv.hi.exact))
    return round_exact(mag / (1 << fmt.p), fmt, RU)


def _zono_add(a: Interval, b: Interval) -> Interval:
    core = _ibp_add(a, b)
    spread = (rounding_error_radius(a).exact + rounding_error_radius(b).exact
              + min_subnormal(a.fmt).exact)
    return Interval(round_exact(core.lo.exact - spread, a.fmt, RD),
                    round_exact(core.hi.exact + spread, a.fmt, RU))


def zono_eval(tree: ExprTree, values: Sequence[FpValue], fmt: FloatFormat) -> Interval:
    """Interval evaluation widened at every addition.

    The widening is the relative rounding error of both operands plus one
    smallest subnormal, summed exactly and applied with a single outward
    rounding of each endpoint.
    """
    return _propagate(tree, _check_inputs(tree, values, fmt), _zono_add)


def symbolic_sum_eval(values: Sequence[FpValue], verifier_tree: ExprTree,
                      fmt: FloatFormat) -> Interval:
    # Back-substitution over independent constant summands collapses to the
    # plain sum, which is then bounded with interval arithmetic along the
    # verifier's own tree.
    return ibp_eval(verifier_tree, values, fmt)


# -- verifier descriptions ----------------------------------------------------


class Kind(enum.Enum):
    IBP = "ibp"
    ZONOTOPE = "zonotope"
    SYMBOLIC_SUM = "symbolic"


class WitnessTree(enum.Enum):
    """Trees taken from the oracle rather than from an order policy."""

    MIN = "min-witness"
    MAX = "max-witness"


TreeChoice = Union[OrderPolicy, WitnessTree, ExprTree]


@dataclass(frozen=True)
class VerifierKind:
    kind: Kind
    fmt: FloatFormat
    tree: TreeChoice = LeftToRight()
    name: str = ""

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        tree = self.tree.value if isinstance(self.tree, WitnessTree) else str(self.tree)
        return f"{self.kind.value}/{self.fmt.tag}/{tree}"

    def resolve_tree(self, values: Sequence[FpValue], deployment: Environment | None = None,
                     limit: int | None = None) -> ExprTree:
        if isinstance(self.tree, WitnessTree):
            if deployment is None:
                raise ValueError("witness trees need a deployment environment")
            reach = reachable_values([convert(v, deployment.fmt) for v in values],
                                     deployment.mode, limit)
            ordered = reach.sorted()
            target = ordered[0] if self.tree is WitnessTree.MIN else ordered[-1]
            return reach.witness(target)
        if isinstance(self.tree, (Leaf, Node)):
            return self.tree
        return build_tree(self.tree, values)

    def bound(self, values: Sequence[FpValue], deployment: Environment | None = None,
              limit: int | None = None) -> Interval:
        tree = self.resolve_tree(values, deployment, limit)
        if self.kind is Kind.IBP:
            return ibp_eval(tree, values, self.fmt)
        if self.kind is Kind.ZONOTOPE:
            return zono_eval(tree, values, self.fmt)
        return symbolic_sum_eval(values, tree, self.fmt)


# -- soundness judge ----------------------------------------------------------


class Status(enum.Enum):
    PRACTICALLY_SOUND = "sound"
    UNSOUND = "unsound"


class Side(enum.Enum):
    NONE = "none"
    LOWER = "lower"
    UPPER = "upper"
    BOTH = "both"


@dataclass(frozen=True)
class Verdict:
    status: Status
    side: Side
    witnesses: tuple[tuple[ExprTree, FpValue], ...] = ()
    lo: FpValue | None = None  # L_r (oracle) or smallest scanned output
    hi: FpValue | None = None
    method: str = "oracle"
    environment: str = ""

    @property
    def witness(self) -> tuple[ExprTree, FpValue] | None:
        return self.witnesses[0] if self.witnesses else None

    @property
    def sound(self) -> bool:
        return self.status is Status.PRACTICALLY_SOUND


def _side(low: bool, high: bool) -> Side:
    if low and high:
        return Side.BOTH
    if low:
        return Side.LOWER
    if high:
        return Side.UPPER
    return Side.NONE


def check_soundness(bound: Interval, values: Sequence[FpValue], deployment: Environment,
                    scan: Iterable[OrderPolicy | ExprTree] = (),
                    limit: int | None = None) -> Verdict:
    """Judge whether ``bound`` contains every output ``deployment`` can produce.

    Environments allowing every tree use the exhaustive oracle while the
    summand count is within ``limit``; above it, only the policies/trees in
    ``scan`` are tried (a search for witnesses, not a proof). Environments with
    only concrete policies are judged exactly over their own trees; ``scan``
    is ignored for them since they cannot realize other trees.
    """
    deployed = [convert(v, deployment.fmt) for v in values]
    limit = oracle_limit() if limit is None else limit
    trees: list[ExprTree] = []
    scan = list(scan)
    if deployment.all_trees and (not limit or len(deployed) <= limit):
        method = "oracle"
        reach = reachable_values(deployed, deployment.mode, limit)
        ordered = reach.sorted()
        outputs = [(ordered[0], lambda v=ordered[0]: reach.witness(v)),
                   (ordered[-1], lambda v=ordered[-1]: reach.witness(v))]
    else:
        if deployment.all_trees and not scan:
            raise SizeLimitError(
                f"{len(deployed)} summands exceed the oracle limit and no scan list was given"
            )
        method = "scan" if deployment.all_trees else "policies"
        extra = scan if deployment.all_trees else []
        for p in [p for p in deployment.policies if not isinstance(p, AllTrees)] + extra:
            trees.append(p if isinstance(p, (Leaf, Node)) else build_tree(p, deployed))
        results = [(evaluate(t, deployed, deployment.mode), t) for t in trees]
        smallest = min(results, key=lambda r: r[0].exact)
        largest = max(results, key=lambda r: r[0].exact)
        outputs = [(smallest[0], lambda t=smallest[1]: t), (largest[0], lambda t=largest[1]: t)]

    (lo, lo_tree), (hi, hi_tree) = outputs
    below = lo.exact < bound.lo.exact
    above = hi.exact > bound.hi.exact
    witnesses = []
    if below:
        witnesses.append((lo_tree(), lo))
    if above:
        witnesses.append((hi_tree(), hi))
    status = Status.UNSOUND if witnesses else Status.PRACTICALLY_SOUND
    return Verdict(status, _side(below, above), tuple(witnesses), lo, hi, method, str(deployment))


def check_soundness_all(bound: Interval, values: Sequence[FpValue],
                        deployments: Sequence[Environment], scan=(),
                        limit: int | None = None) -> Verdict:
    """Combine verdicts over several candidate deployment environments."""
    verdicts = [check_soundness(bound, values, env, scan, limit) for env in deployments]
    bad = [v for v in verdicts if not v.sound]
    if not bad:
        return Verdict(Status.PRACTICALLY_SOUND, Side.NONE,
                       lo=min((v.lo for v in verdicts), key=lambda x: x.exact),
                       hi=max((v.hi for v in verdicts), key=lambda x: x.exact),
                       method="+".join(sorted({v.method for v in verdicts})),
                       environment=";".join(v.environment for v in verdicts))
    low = any(v.side in (Side.LOWER, Side.BOTH) for v in bad)
    high = any(v.side in (Side.UPPER, Side.BOTH) for v in bad)
    first = bad[0]
    return Verdict(Status.UNSOUND, _side(low, high),
                   tuple(w for v in bad for w in v.witnesses), first.lo, first.hi,
                   first.method, ";".join(v.environment for v in bad))
