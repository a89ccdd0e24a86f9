"""Binary summation trees, order policies and deployment environments."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

from .errors import ArityError, EmptyInputError, FormatMismatchError, ParameterError
from .fpcore import FloatFormat, FpValue, RoundingMode, add


@dataclass(frozen=True)
class Leaf:
    index: int

    @property
    def size(self) -> int:
        return 1

    def leaves(self) -> Iterator[int]:
        yield self.index

    def __repr__(self) -> str:
        return f"L{self.index}"


@dataclass(frozen=True)
class Node:
    left: ExprTree
    right: ExprTree
    size: int = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "size", self.left.size + self.right.size)

    def leaves(self) -> Iterator[int]:
        stack: list[ExprTree] = [self]
        while stack:
            t = stack.pop()
            if isinstance(t, Leaf):
                yield t.index
            else:
                stack.append(t.right)
                stack.append(t.left)

    def __repr__(self) -> str:
        return f"({self.left!r}+{self.right!r})"


ExprTree = Union[Leaf, Node]


def validate_tree(tree: ExprTree, n: int) -> None:
    """Raise ``ArityError`` unless leaves of ``tree`` are exactly ``0..n-1``."""
    idx = sorted(tree.leaves())
    if idx != list(range(n)):
        raise ArityError(f"tree leaves {idx[:8]}... do not cover 0..{n - 1} exactly once")


def to_nested(tree: ExprTree):
    """Serialize as nested arrays of leaf indices, e.g. ``[[0, 1], 2]``."""
    if isinstance(tree, Leaf):
        return tree.index
    return [to_nested(tree.left), to_nested(tree.right)]


def from_nested(obj) -> ExprTree:
    if isinstance(obj, bool):
        raise ValueError("booleans are not leaf indices")
    if isinstance(obj, int):
        return Leaf(obj)
    if isinstance(obj, (list, tuple)) and len(obj) == 2:
        return Node(from_nested(obj[0]), from_nested(obj[1]))
    raise ValueError(f"malformed tree literal {obj!r}")


def chain(order: Sequence[int]) -> ExprTree:
    """Left-to-right chain ``((x[o0] + x[o1]) + x[o2]) + ...``."""
    if not order:
        raise EmptyInputError("cannot build a tree over zero summands")
    tree: ExprTree = Leaf(order[0])
    for i in order[1:]:
        tree = Node(tree, Leaf(i))
    return tree


def balanced(order: Sequence[int]) -> ExprTree:
    if not order:
        raise EmptyInputError("cannot build a tree over zero summands")
    level: list[ExprTree] = [Leaf(i) for i in order]
    # pairwise reduction; an odd tail element is carried up unchanged
    while len(level) > 1:
        nxt = [Node(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


# -- policies ---------------------------------------------------------------


@dataclass(frozen=True)
class LeftToRight:
    def __str__(self) -> str:
        return "ltr"


@dataclass(frozen=True)
class Balanced:
    def __str__(self) -> str:
        return "balanced"


@dataclass(frozen=True)
class Chunked:
    k: int

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ParameterError("chunk size must be at least 2")

    def __str__(self) -> str:
        return f"chunked:{self.k}"


@dataclass(frozen=True)
class SortedDecreasing:
    def __str__(self) -> str:
        return "sorted-dec"


@dataclass(frozen=True)
class SortedDecreasingAbs:
    def __str__(self) -> str:
        return "sorted-dec-abs"


@dataclass(frozen=True)
class RandomPermutation:
    seed: int

    def __str__(self) -> str:
        return f"random-perm:{self.seed}"


@dataclass(frozen=True)
class RandomTree:
    seed: int

    def __str__(self) -> str:
        return f"random-tree:{self.seed}"


@dataclass(frozen=True)
class Permuted:
    """Left-to-right chain over an explicit leaf order (trigger trees)."""

    order: tuple[int, ...]

    def __str__(self) -> str:
        return "perm:" + ",".join(map(str, self.order))


@dataclass(frozen=True)
class AllTrees:
    """Every binary tree over the summands may occur."""

    def __str__(self) -> str:
        return "all"


OrderPolicy = Union[
    LeftToRight, Balanced, Chunked, SortedDecreasing, SortedDecreasingAbs,
    RandomPermutation, RandomTree, Permuted, AllTrees,
]


def parse_policy(text: str) -> OrderPolicy:
    name, _, arg = text.partition(":")
    simple = {
        "ltr": LeftToRight, "balanced": Balanced, "sorted-dec": SortedDecreasing,
        "sorted-dec-abs": SortedDecreasingAbs, "all": AllTrees,
    }
    if name in simple and not arg:
        return simple[name]()
    try:
        if name == "chunked":
            return Chunked(int(arg))
        if name == "random-perm":
            return RandomPermutation(int(arg))
        if name == "random-tree":
            return RandomTree(int(arg))
        if name == "perm":
            return Permuted(tuple(int(i) for i in arg.split(",")))
    except ValueError as exc:
        raise ParameterError(f"bad policy argument in {text!r}") from exc
    raise ParameterError(f"unknown order policy {text!r}")


def _random_tree(rng: random.Random, items: list[int]) -> ExprTree:
    if len(items) == 1:
        return Leaf(items[0])
    cut = rng.randint(1, len(items) - 1)
    return Node(_random_tree(rng, items[:cut]), _random_tree(rng, items[cut:]))


def build_tree(policy: OrderPolicy, values: Sequence[FpValue]) -> ExprTree:
    """Tree that ``policy`` realizes for the given summands."""
    n = len(values)
    if n == 0:
        raise EmptyInputError("cannot build a tree over zero summands")
    idx = list(range(n))
    if isinstance(policy, LeftToRight):
        return chain(idx)
    if isinstance(policy, Balanced):
        return balanced(idx)
    if isinstance(policy, Chunked):
        blocks = [chain(idx[i:i + policy.k]) for i in range(0, n, policy.k)]
        tree = blocks[0]
        for b in blocks[1:]:
            tree = Node(tree, b)
        return tree
    if isinstance(policy, SortedDecreasing):
        return chain(sorted(idx, key=lambda i: (-values[i].exact, i)))
    if isinstance(policy, SortedDecreasingAbs):
        return chain(sorted(idx, key=lambda i: (-abs(values[i].exact), i)))
    if isinstance(policy, RandomPermutation):
        rng = random.Random(policy.seed)
        rng.shuffle(idx)
        return chain(idx)
    if isinstance(policy, RandomTree):
        rng = random.Random(policy.seed)
        rng.shuffle(idx)
        return _random_tree(rng, idx)
    if isinstance(policy, Permuted):
        if sorted(policy.order) != idx:
            raise ArityError(f"permutation of length {len(policy.order)} does not fit {n} summands")
        return chain(policy.order)
    if isinstance(policy, AllTrees):
        raise ParameterError("AllTrees denotes a set of trees, not a single tree")
    raise TypeError(f"not an order policy: {policy!r}")


@dataclass(frozen=True)
class Environment:
    """Number format, rounding mode and the trees realizable with nonzero probability."""

    fmt: FloatFormat
    mode: RoundingMode
    policies: tuple[OrderPolicy, ...]

    def __post_init__(self) -> None:
        pols = tuple(dict.fromkeys(self.policies))
        if not pols:
            raise ParameterError("an environment needs at least one order policy")
        object.__setattr__(self, "policies", pols)

    @property
    def deterministic(self) -> bool:
        return len(self.policies) == 1 and not isinstance(self.policies[0], AllTrees)

    @property
    def all_trees(self) -> bool:
        return any(isinstance(p, AllTrees) for p in self.policies)

    def __str__(self) -> str:
        return f"{self.fmt.tag}/{self.mode.value}/" + "|".join(map(str, self.policies))


def sample_tree(env: Environment, seed: int, values: Sequence[FpValue]) -> ExprTree:
    """Pick one of the environment's concrete policies reproducibly from ``seed``."""
    concrete = [p for p in env.policies if not isinstance(p, AllTrees)]
    if not concrete:
        raise ParameterError("environment has no concrete order policy to sample")
    rng = random.Random(seed)
    return build_tree(rng.choice(concrete), values)


# -- evaluation -------------------------------------------------------------


@dataclass(frozen=True)
class EvalTrace:
    tree: ExprTree
    partials: tuple[tuple[Node, FpValue], ...]
    result: FpValue


def _check_values(values: Sequence[FpValue]) -> None:
    if not values:
        raise EmptyInputError("no summands")
    fmt = values[0].fmt
    for v in values:
        if v.fmt is not fmt:
            raise FormatMismatchError("all summands must share one format")


def evaluate(tree: ExprTree, values: Sequence[FpValue], mode: RoundingMode) -> FpValue:
    """Evaluate ``tree`` bottom-up with every addition rounded under ``mode``."""
    return evaluate_traced(tree, values, mode, record=False).result


def evaluate_traced(tree: ExprTree, values: Sequence[FpValue], mode: RoundingMode,
                    record: bool = True) -> EvalTrace:
    _check_values(values)
    if tree.size != len(values):
        raise ArityError(f"tree has {tree.size} leaves but {len(values)} summands were given")
    partials: list[tuple[Node, FpValue]] = []
    # iterative post-order keeps deep chains (n ~ 10^4) off the recursion limit
    out: list[FpValue] = []
    seen: set[int] = set()
    stack: list[tuple[ExprTree, bool]] = [(tree, False)]
    while stack:
        t, expanded = stack.pop()
        if isinstance(t, Leaf):
            if not 0 <= t.index < len(values):
                raise ArityError(f"leaf index {t.index} out of range")
            if t.index in seen:
                raise ArityError(f"leaf index {t.index} used twice")
            seen.add(t.index)
            out.append(values[t.index])
        elif expanded:
            b = out.pop()
            a = out.pop()
            r = add(a, b, mode)
            out.append(r)
            if record:
                partials.append((t, r))
        else:
            stack.append((t, True))
            stack.append((t.right, False))
            stack.append((t.left, False))
    return EvalTrace(tree, tuple(partials), out[0])
