"""Dense ReLU networks evaluated under deployment environments, and backdoor injection."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .detectors import DetectorSpec, Polarity
from .errors import BoundError, DimensionError, ParameterError
from .exprtree import Environment, LeftToRight, build_tree, evaluate, sample_tree
from .fpcore import (
    B64,
    FloatFormat,
    FpValue,
    add,
    convert,
    format_exact,
    from_exact,
    mul,
    parse_literal,
)


@dataclass(frozen=True)
class Layer:
    weights: tuple[tuple[FpValue, ...], ...]  # one row per output neuron
    bias: tuple[FpValue, ...]

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.bias):
            raise DimensionError("one bias per weight row is required")
        widths = {len(r) for r in self.weights}
        if len(widths) > 1:
            raise DimensionError("ragged weight matrix")

    @property
    def n_in(self) -> int:
        return len(self.weights[0]) if self.weights else 0

    @property
    def n_out(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class Network:
    """Affine layers with ReLU in between and identity after the last one."""

    layers: tuple[Layer, ...]
    fmt: FloatFormat = B64

    def __post_init__(self) -> None:
        if not self.layers:
            raise DimensionError("a network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise DimensionError(f"layer widths do not chain: {a.n_out} -> {b.n_in}")

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_classes(self) -> int:
        return self.layers[-1].n_out

    def to_json(self) -> dict:
        return {
            "format": self.fmt.tag,
            "layers": [
                {
                    "weights": [[format_exact(w.exact) for w in row] for row in layer.weights],
                    "bias": [format_exact(b.exact) for b in layer.bias],
                }
                for layer in self.layers
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> Network:
        fmt = FloatFormat.from_tag(obj["format"])
        layers = tuple(
            Layer(tuple(tuple(parse_literal(w, fmt) for w in row) for row in layer["weights"]),
                  tuple(parse_literal(b, fmt) for b in layer["bias"]))
            for layer in obj["layers"]
        )
        return cls(layers, fmt)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> Network:
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class DeployedNet:
    net: Network
    env: Environment
    seed: int = 0
    _converted: list = field(default_factory=list, repr=False, compare=False)

    def layers(self) -> tuple[Layer, ...]:
        # parameters re-encoded in the deployment format once, losslessly
        if not self._converted:
            fmt = self.env.fmt
            self._converted.append(tuple(
                Layer(tuple(tuple(convert(w, fmt) for w in row) for row in layer.weights),
                      tuple(convert(b, fmt) for b in layer.bias))
                for layer in self.net.layers
            ))
        return self._converted[0]


def _accumulate(summands: list[FpValue], env: Environment, seed: int) -> FpValue:
    if env.deterministic and isinstance(env.policies[0], LeftToRight):
        # adding +0 is exact in every mode, so zero summands can be skipped
        acc = FpValue(0, env.fmt)
        for s in summands:
            if not s.is_zero:
                acc = s if acc.is_zero else add(acc, s, env.mode)
        return acc
    if env.deterministic:
        tree = build_tree(env.policies[0], summands)
    else:
        tree = sample_tree(env, seed, summands)
    return evaluate(tree, summands, env.mode)


def _product(x: FpValue, w: FpValue, env: Environment) -> FpValue:
    return mul(x, w, env.mode)


def argmax(values: Sequence[FpValue | Fraction]) -> int:
    """Index of the largest value; the lowest index wins ties."""
    keys = [v.exact if isinstance(v, FpValue) else v for v in values]
    best = 0
    for i, k in enumerate(keys):
        if k > keys[best]:
            best = i
    return best


def deploy_eval(dnet: DeployedNet, x: Sequence[FpValue]) -> tuple[list[FpValue], int]:
    """Logits and predicted class of the network as deployed in ``dnet.env``.

    Every product is rounded once under the environment's mode; each neuron's
    products plus its bias are then summed along a tree chosen by the
    environment.
    """
    env = dnet.env
    layers = dnet.layers()
    if len(x) != layers[0].n_in:
        raise DimensionError(f"expected {layers[0].n_in} inputs, got {len(x)}")
    act = [convert(v, env.fmt) for v in x]
    for li, layer in enumerate(layers):
        out = []
        for j, (row, b) in enumerate(zip(layer.weights, layer.bias)):
            summands = [_product(a, w, env) for a, w in zip(act, row)] + [b]
            seed = (dnet.seed * 1_000_003 + li) * 1_000_003 + j
            out.append(_accumulate(summands, env, seed))
        if li < len(layers) - 1:
            out = [v if not v.negative else FpValue(0, env.fmt) for v in out]
        act = out
    return act, argmax(act)


def reference_eval(net: Network, x: Sequence[FpValue | Fraction | int]) -> list[Fraction]:
    """Exact real-arithmetic logits."""
    act = [v.exact if isinstance(v, FpValue) else Fraction(v) for v in x]
    for li, layer in enumerate(net.layers):
        out = [sum((a * w.exact for a, w in zip(act, row)), Fraction(0)) + b.exact
               for row, b in zip(layer.weights, layer.bias)]
        if li < len(net.layers) - 1:
            out = [max(v, Fraction(0)) for v in out]
        act = out
    return act


# -- toy host fixture ---------------------------------------------------------

HOST_SIZES = (8, 16, 12, 10)


def make_host(seed: int = 0, sizes: Sequence[int] = HOST_SIZES, fmt: FloatFormat = B64) -> Network:
    """Small dense ReLU host with integer weights in [-3, 3] and biases in [-4, 4].

    With integer inputs in [0, 3] every partial sum is an integer far below
    2^24, so the host computes exactly in binary32 and binary64 under any
    summation order.
    """
    rng = random.Random(seed)
    layers = []
    for n_in, n_out in zip(sizes, sizes[1:]):
        w = tuple(tuple(from_exact(rng.randint(-3, 3), fmt) for _ in range(n_in)) for _ in range(n_out))
        b = tuple(from_exact(rng.randint(-4, 4), fmt) for _ in range(n_out))
        layers.append(Layer(w, b))
    return Network(tuple(layers), fmt)


def make_probes(net: Network, count: int = 64, seed: int = 0) -> list[list[FpValue]]:
    """Seeded integer probe inputs whose exact host logits have a unique maximum."""
    rng = random.Random(seed)
    probes: list[list[FpValue]] = []
    attempts = 0
    while len(probes) < count:
        attempts += 1
        if attempts > 100 * count:
            raise ParameterError("could not find enough probes with a unique top logit")
        x = [from_exact(rng.randint(0, 3), net.fmt) for _ in range(net.n_in)]
        z = reference_eval(net, x)
        top = max(z)
        if sum(1 for v in z if v == top) == 1:
            probes.append(x)
    return probes


def logit_bound(net: Network, probes: Sequence[Sequence[FpValue]]) -> FpValue:
    """Smallest power of two strictly above every host logit magnitude on ``probes``."""
    peak = max(abs(v) for x in probes for v in reference_eval(net, x))
    b = 1
    while b <= peak:
        b *= 2
    return from_exact(b, net.fmt)


# -- backdoor -------------------------------------------------------------------


@dataclass(frozen=True)
class BackdoorConfig:
    """Gate parameters.

    The detector output ``d`` (after ReLU) is squashed to
    ``c = ReLU(k*d) - ReLU(k*d - 1)``, which is 1 for ``d >= 1/k`` and 0 for
    ``d = 0``. Two gates follow: ``shift = ReLU(alpha1*c + beta1)`` and
    ``keep = ReLU(alpha2*c + beta2)``.
    """

    alpha1: int
    alpha2: int
    beta1: int
    beta2: int
    polarity: Polarity
    logit_bound: FpValue
    sharpness: int = 2

    @classmethod
    def for_polarity(cls, polarity: Polarity, bound: FpValue, sharpness: int = 2) -> BackdoorConfig:
        if polarity is Polarity.TRIGGER_ON_NONZERO:
            return cls(1, -2, 0, 1, polarity, bound, sharpness)
        return cls(-2, 1, 1, 0, polarity, bound, sharpness)

    def __post_init__(self) -> None:
        expected = (1, -2, 0, 1) if self.polarity is Polarity.TRIGGER_ON_NONZERO else (-2, 1, 1, 0)
        if (self.alpha1, self.alpha2, self.beta1, self.beta2) != expected:
            raise ParameterError(f"alpha/beta {expected} realize {self.polarity.value}")
        if self.sharpness < 1 or self.sharpness & (self.sharpness - 1):
            raise ParameterError("sharpness must be a power of two")


def _sparse(n: int, fmt: FloatFormat, entries: dict[int, object]) -> tuple[FpValue, ...]:
    row = [FpValue(0, fmt)] * n
    for i, v in entries.items():
        row[i] = v if isinstance(v, FpValue) else from_exact(v, fmt)
    return tuple(row)


def _pad(row: Sequence[FpValue], extra: int, fmt: FloatFormat) -> tuple[FpValue, ...]:
    return tuple(row) + (FpValue(0, fmt),) * extra


def inject_backdoor(host: Network, spec: DetectorSpec, cfg: BackdoorConfig,
                    probes: Sequence[Sequence[FpValue]] = ()) -> Network:
    """Wrap ``host`` with a detector-driven gate that rotates the logits by one class.

    Layout (ReLU after every layer but the last):

    1. host layer 1 plus one constant-1 neuron per detector edge (zero
       weights, bias 1);
    2. host layer 2 (or an identity copy if the host has one hidden layer)
       plus the detector neuron, whose edges read the constant neurons;
    3. remaining host hidden layers, carrying the detector output along;
    4. squash ``ReLU(k*d)`` and ``ReLU(k*d - 1)``;
    5. gates ``shift`` and ``keep``;
    6. ``keep_j = ReLU(z_j + B - 3B*shift)`` and
       ``rot_j = ReLU(z_{j-1} + B - 3B*keep)`` from the host output layer;
    7. ``out_j = keep_j + rot_j - B``.
    """
    fmt = host.fmt
    layers = host.layers
    if len(layers) < 2:
        raise DimensionError("the host needs at least one hidden layer")
    for x in probes:
        if len(x) != host.n_in:
            raise DimensionError("probe width does not match the host input")
    bound = convert(cfg.logit_bound, fmt)
    big = bound.exact
    for x in probes:
        if any(abs(z) >= big for z in reference_eval(host, x)):
            raise BoundError("a host logit on the probe set reaches the logit bound")

    edges = [convert(w, fmt) for w in spec.edges]
    bias = convert(spec.bias, fmt) if spec.bias is not None else FpValue(0, fmt)
    n_const = len(edges)
    hidden, out_layer = layers[:-1], layers[-1]
    one = from_exact(1, fmt)
    new: list[Layer] = []

    # 1. constants
    l1 = hidden[0]
    n1 = l1.n_out
    new.append(Layer(
        l1.weights + tuple(_sparse(l1.n_in, fmt, {}) for _ in range(n_const)),
        l1.bias + (one,) * n_const,
    ))
    # 2. detector next to the second host layer
    if len(hidden) >= 2:
        l2 = hidden[1]
        host_rows = tuple(_pad(r, n_const, fmt) for r in l2.weights)
        host_bias = l2.bias
        rest = hidden[2:]
    else:
        host_rows = tuple(_sparse(n1 + n_const, fmt, {i: 1}) for i in range(n1))
        host_bias = (FpValue(0, fmt),) * n1
        rest = ()
    det_row = (FpValue(0, fmt),) * n1 + tuple(edges)
    new.append(Layer(host_rows + (det_row,), host_bias + (bias,)))
    width = len(host_rows)
    # 3. carry d through the remaining hidden layers
    for layer in rest:
        carry = _sparse(width + 1, fmt, {width: 1})
        new.append(Layer(tuple(_pad(r, 1, fmt) for r in layer.weights) + (carry,),
                         layer.bias + (FpValue(0, fmt),)))
        width = layer.n_out
    d = width
    k = cfg.sharpness
    ident = tuple(_sparse(width + 1, fmt, {i: 1}) for i in range(width))
    zeros = (FpValue(0, fmt),) * width
    # 4. squash
    new.append(Layer(ident + (_sparse(width + 1, fmt, {d: k}), _sparse(width + 1, fmt, {d: k})),
                     zeros + (FpValue(0, fmt), from_exact(-1, fmt))))
    # 5. gates
    r1, r2 = width, width + 1
    ident2 = tuple(_sparse(width + 2, fmt, {i: 1}) for i in range(width))
    shift_row = _sparse(width + 2, fmt, {r1: cfg.alpha1, r2: -cfg.alpha1})
    keep_row = _sparse(width + 2, fmt, {r1: cfg.alpha2, r2: -cfg.alpha2})
    new.append(Layer(ident2 + (shift_row, keep_row),
                     zeros + (from_exact(cfg.beta1, fmt), from_exact(cfg.beta2, fmt))))
    # 6. keep / rotate blocks
    m = out_layer.n_out
    g_shift, g_keep = width, width + 1
    sat = from_exact(-3 * big, fmt)
    keep_rows, rot_rows, keep_b, rot_b = [], [], [], []
    for j in range(m):
        src = (j - 1) % m
        keep_rows.append(tuple(out_layer.weights[j]) + (sat, FpValue(0, fmt)))
        keep_b.append(from_exact(out_layer.bias[j].exact + big, fmt))
        rot_rows.append(tuple(out_layer.weights[src]) + (FpValue(0, fmt), sat))
        rot_b.append(from_exact(out_layer.bias[src].exact + big, fmt))
    new.append(Layer(tuple(keep_rows + rot_rows), tuple(keep_b + rot_b)))
    # 7. recombine
    final = tuple(_sparse(2 * m, fmt, {j: 1, m + j: 1}) for j in range(m))
    new.append(Layer(final, (from_exact(-big, fmt),) * m))
    return Network(tuple(new), fmt)


def gate_value(backdoored: Network, dnet_env: Environment, x: Sequence[FpValue], seed: int = 0) -> FpValue:
    """Value of the ``shift`` gate inside a network built by ``inject_backdoor``."""
    dn = DeployedNet(Network(backdoored.layers[:-2], backdoored.fmt), dnet_env, seed)
    # the truncated net ends in the gate layer, which has no ReLU there
    logits, _ = deploy_eval(dn, x)
    g = logits[-2]
    return FpValue(0, g.fmt) if g.negative else g
