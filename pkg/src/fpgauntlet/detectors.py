"""Environment-triggered detector neurons.

A detector is a linear neuron fed with constant ones, so its output is the
plain sum of its edge weights and bias. The sums are built so that the
default left-to-right evaluation gives one value and some other precision or
summation order gives another.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import ParameterError
from .exprtree import (
    Environment,
    ExprTree,
    Leaf,
    Node,
    OrderPolicy,
    Permuted,
    SortedDecreasing,
    SortedDecreasingAbs,
    build_tree,
    evaluate,
    sample_tree,
)
from .fpcore import B64, FloatFormat, FpValue, RoundingMode, add, convert, from_exact, neg, omega


class DetectorKind(enum.Enum):
    PRECISION = "precision"
    ORDER1 = "order1"
    ORDER2 = "order2"
    ORDER3 = "order3"


class Polarity(enum.Enum):
    TRIGGER_ON_NONZERO = "nonzero"
    TRIGGER_ON_ZERO = "zero"


@dataclass(frozen=True)
class DetectorSpec:
    kind: DetectorKind
    params: tuple[tuple[str, object], ...]
    edges: tuple[FpValue, ...]
    bias: FpValue | None

    @property
    def weights(self) -> tuple[FpValue, ...]:
        """Summands in default order: edge weights, then the bias if any."""
        return self.edges if self.bias is None else self.edges + (self.bias,)

    @property
    def label(self) -> str:
        args = ",".join(f"{k}={v.tag if isinstance(v, FloatFormat) else v}" for k, v in self.params)
        return f"{self.kind.value}({args})"

    @property
    def default_polarity(self) -> Polarity:
        # default order must yield the clean behaviour
        if self.kind is DetectorKind.ORDER1:
            return Polarity.TRIGGER_ON_NONZERO
        return Polarity.TRIGGER_ON_ZERO

    @property
    def exact_value(self) -> Fraction:
        return sum((w.exact for w in self.weights), Fraction(0))

    def to_json(self) -> dict:
        out = {"kind": self.kind.value}
        for k, v in self.params:
            out[k] = v.tag if isinstance(v, FloatFormat) else v
        return out


def _power_of_two(name: str, v: int) -> None:
    if not isinstance(v, int) or v < 1 or v & (v - 1):
        raise ParameterError(f"{name} must be a positive power of two, got {v!r}")


def precision_detector(target: FloatFormat) -> DetectorSpec:
    """``omega + 1 - omega``: 0 in ``target`` precision, 1 in any wider one."""
    w = omega(target)
    return DetectorSpec(DetectorKind.PRECISION, (("target", target),),
                        (w, from_exact(1, w.fmt)), neg(w))


def order1_detector(h1: int, h2: int, fmt: FloatFormat = B64) -> DetectorSpec:
    _power_of_two("h1", h1)
    if not isinstance(h2, int) or h2 < 1:
        raise ParameterError(f"h2 must be a positive integer, got {h2!r}")
    part = from_exact(omega(fmt).exact / h1, fmt)
    block = (part,) * h1 + (from_exact(1, fmt),) + (neg(part),) * h1
    return DetectorSpec(DetectorKind.ORDER1, (("h1", h1), ("h2", h2), ("fmt", fmt)),
                        block * h2, None)


def order2_detector(h: int, fmt: FloatFormat = B64) -> DetectorSpec:
    _power_of_two("h", h)
    w = omega(fmt)
    small = from_exact(Fraction(2, h), fmt)
    return DetectorSpec(DetectorKind.ORDER2, (("h", h), ("fmt", fmt)), (small,) * h + (w,), neg(w))


def order3_detector(h: int, fmt: FloatFormat = B64) -> DetectorSpec:
    _power_of_two("h", h)
    w = omega(fmt)
    return DetectorSpec(DetectorKind.ORDER3, (("h", h), ("fmt", fmt)),
                        (from_exact(1, fmt),) * h + (w,), neg(w))


def make_detector(kind: DetectorKind | str, **params) -> DetectorSpec:
    kind = DetectorKind(kind)
    fmt = params.pop("fmt", B64)
    if isinstance(fmt, str):
        fmt = FloatFormat.from_tag(fmt)
    try:
        if kind is DetectorKind.PRECISION:
            target = params.pop("target", fmt)
            if isinstance(target, str):
                target = FloatFormat.from_tag(target)
            spec = precision_detector(target)
        elif kind is DetectorKind.ORDER1:
            spec = order1_detector(params.pop("h1"), params.pop("h2"), fmt)
        elif kind is DetectorKind.ORDER2:
            spec = order2_detector(params.pop("h"), fmt)
        else:
            spec = order3_detector(params.pop("h"), fmt)
    except KeyError as exc:
        raise ParameterError(f"{kind.value} detector needs parameter {exc}") from exc
    if params:
        raise ParameterError(f"unexpected detector parameters {sorted(params)}")
    return spec


def omega_first_order(spec: DetectorSpec, position: int) -> Permuted:
    """Left-to-right order with the omega edge moved to ``position`` (0-based)
    among the edges; the bias stays last."""
    if spec.kind not in (DetectorKind.ORDER2, DetectorKind.ORDER3):
        raise ParameterError("only order2/order3 detectors have a single omega edge")
    n_edges = len(spec.edges)
    if not 0 <= position < n_edges:
        raise ParameterError(f"position {position} outside 0..{n_edges - 1}")
    w_idx = n_edges - 1
    rest = [i for i in range(n_edges) if i != w_idx]
    order = rest[:position] + [w_idx] + rest[position:] + [n_edges]
    return Permuted(tuple(order))


def trigger_policies(spec: DetectorSpec) -> list[OrderPolicy]:
    """Orders known by construction to move the detector off its default value.

    Used as the witness search list when the summand count is beyond the
    exhaustive oracle.
    """
    n = len(spec.weights)
    if spec.kind is DetectorKind.PRECISION:
        return [Permuted((0, 2, 1))]
    if spec.kind is DetectorKind.ORDER1:
        return [SortedDecreasingAbs(), SortedDecreasing(), Permuted(tuple(reversed(range(n))))]
    return [omega_first_order(spec, pos) for pos in range(len(spec.edges))] + [SortedDecreasing()]


def detector_value(spec: DetectorSpec, env: Environment,
                   policy: OrderPolicy | ExprTree | None = None, seed: int = 0) -> FpValue:
    """Output of the detector neuron deployed in ``env``.

    ``policy`` may be any order policy or an explicit trigger tree; by default
    the environment picks its own tree (sampled from ``seed`` if stochastic).
    """
    values = [convert(w, env.fmt) for w in spec.weights]
    if policy is None:
        tree = sample_tree(env, seed, values)
    elif isinstance(policy, (Leaf, Node)):
        tree = policy
    else:
        tree = build_tree(policy, values)
    return evaluate(tree, values, env.mode)


def chain_value(values: Sequence[FpValue], mode: RoundingMode, start: FpValue | None = None) -> FpValue:
    """Left-to-right sum of ``values`` (continuing from ``start`` if given).

    Equal to evaluating the chain tree, but a run of identical summands is
    skipped as soon as adding one of them leaves the accumulator unchanged:
    every further addition of the same value would reproduce the same state.
    """
    it = iter(values)
    acc = next(it) if start is None else start
    rest = list(it)
    i = 0
    while i < len(rest):
        x = rest[i]
        nxt = add(acc, x, mode)
        if nxt == acc:
            while i + 1 < len(rest) and rest[i + 1] == x:
                i += 1
        acc = nxt
        i += 1
    return acc


def omega_position_values(spec: DetectorSpec, env: Environment) -> list[FpValue]:
    """Detector output for every left-to-right order produced by
    :func:`omega_first_order`, indexed by the omega position."""
    if spec.kind not in (DetectorKind.ORDER2, DetectorKind.ORDER3):
        raise ParameterError("only order2/order3 detectors have a single omega edge")
    values = deployed_weights(spec, env.fmt)
    *small, w, bias = values
    out = []
    prefix: FpValue | None = None
    for pos in range(len(small) + 1):
        acc = w if prefix is None else add(prefix, w, env.mode)
        out.append(chain_value(small[pos:] + [bias], env.mode, acc))
        if pos < len(small):
            prefix = small[pos] if prefix is None else add(prefix, small[pos], env.mode)
    return out


def deployed_weights(spec: DetectorSpec, fmt: FloatFormat) -> list[FpValue]:
    return [convert(w, fmt) for w in spec.weights]


def value_table(spec: DetectorSpec, envs: Sequence[Environment]) -> list[tuple[str, FpValue]]:
    return [(str(env), detector_value(spec, env)) for env in envs]
