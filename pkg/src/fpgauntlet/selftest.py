"""Quick invariant suite run by ``fpgauntlet selftest``.

Each check is small enough that the whole suite finishes in seconds. Faults
can be injected to confirm that the suite notices broken arithmetic.
"""

from __future__ import annotations

import contextlib
import random
import time
from dataclasses import dataclass
from typing import Callable, Iterator
from unittest import mock

from . import fpcore, verifiers
from .detectors import Polarity, detector_value, order1_detector, order2_detector, precision_detector
from .errors import FloatOverflowError
from .exprtree import AllTrees, Environment, LeftToRight, SortedDecreasing, build_tree, chain, evaluate
from .fpcore import ALL_MODES, B32, B64, NE, RD, RU, RZ, add, fp, omega, round_exact
from .network import (
    BackdoorConfig,
    DeployedNet,
    argmax,
    deploy_eval,
    inject_backdoor,
    logit_bound,
    make_host,
    make_probes,
    reference_eval,
)
from .oracle import enumerate_all_trees, extremes, reachable_values
from .sampling import adversarial_pair, summand
from .verifiers import check_soundness, ibp_eval, zono_eval


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise AssertionError(msg)


def worked_examples() -> None:
    w = omega(B64)
    vals = [w, fp(1), -w]
    for mode in (RD, NE):
        _check(evaluate(chain([0, 1, 2]), vals, mode).exact == 0, f"(2^53+1)-2^53 != 0 under {mode.value}")
    _check(evaluate(chain([0, 2, 1]), vals, NE).exact == 1, "(2^53-2^53)+1 != 1")
    w32 = omega(B32)
    _check(evaluate(chain([0, 1, 2]), [w32, fp(1, B32), -w32], NE).exact == 0, "binary32 absorption")


def add_matches_rounding() -> None:
    rng = random.Random(1)
    for fmt in (B32, B64):
        for _ in range(1500):
            a, b = adversarial_pair(rng, fmt)
            for mode in ALL_MODES:
                try:
                    got = add(a, b, mode)
                except FloatOverflowError:
                    continue
                _check(got == round_exact(a.exact + b.exact, fmt, mode), f"add({a}, {b}) under {mode.value}")


def mode_ordering() -> None:
    rng = random.Random(2)
    for _ in range(2000):
        a, b = adversarial_pair(rng, B64)
        try:
            lo, ne, hi = add(a, b, RD), add(a, b, NE), add(a, b, RU)
        except FloatOverflowError:
            continue
        _check(lo <= ne <= hi and lo.exact <= a.exact + b.exact <= hi.exact, f"mode order for {a}, {b}")


def oracle_matches_enumeration() -> None:
    rng = random.Random(3)
    trees = {n: list(enumerate_all_trees(n)) for n in range(1, 5)}
    for _ in range(60):
        n = rng.randint(1, 4)
        vals = [summand(rng, B64) for _ in range(n)]
        mode = rng.choice(ALL_MODES)
        naive = {evaluate(t, vals, mode) for t in trees[n]}
        _check(reachable_values(vals, mode).values == naive, f"oracle on {vals} under {mode.value}")


def ibp_contains_every_tree() -> None:
    rng = random.Random(4)
    trees = list(enumerate_all_trees(4))
    for _ in range(10):
        vals = [summand(rng, B64) for _ in range(4)]
        for t in trees:
            iv = ibp_eval(t, vals, B64)
            for mode in ALL_MODES:
                _check(iv.contains(evaluate(t, vals, mode)), "tree output outside its IBP interval")


def default_ibp_counterexample() -> None:
    w = omega(B64).exact
    vals = [fp(1), fp(1), fp(w)]
    bound = ibp_eval(chain([0, 1, 2]), vals, B64)
    _check((bound.lo.exact, bound.hi.exact) == (w + 2, w + 2), "IBP((1+1)+w) != [w+2, w+2]")
    for mode in ALL_MODES:
        v = check_soundness(bound, vals, Environment(B64, mode, (AllTrees(),)))
        _check(not v.sound, f"default IBP judged sound under {mode.value}")


def decreasing_order_counterexample() -> None:
    w = omega(B64).exact
    vals = [fp(w), fp(1.25), fp(1.25), fp(1.25)]
    dec = evaluate(build_tree(SortedDecreasing(), vals), vals, NE)
    _check(extremes(vals, NE).L_r.exact == w + 4 and dec.exact == w + 6, "decreasing-order witness")


def zonotope_widening() -> None:
    w = omega(B64).exact
    ones = [fp(1)] * 9 + [fp(w)]
    iv = zono_eval(chain(range(10)), ones, B64)
    _check(iv.lo.exact > w, "zonotope lower bound not above the reachable minimum")
    _check(zono_eval(chain([0, 1]), [fp(1), fp(1)], B64).strictly_contains(
        ibp_eval(chain([0, 1]), [fp(1), fp(1)], B64)), "zonotope not strictly wider than IBP")


def detector_truth_table() -> None:
    ltr = (LeftToRight(),)
    _check(detector_value(precision_detector(B32), Environment(B32, NE, ltr)).exact == 0, "precision in b32")
    _check(detector_value(precision_detector(B32), Environment(B64, NE, ltr)).exact == 1, "precision in b64")
    _check(detector_value(order1_detector(4, 15), Environment(B64, RZ, ltr)).exact == 0, "order1 default")
    _check(detector_value(order2_detector(64), Environment(B64, NE, ltr)).exact == 2, "order2 default")


def backdoor_contract() -> None:
    host = make_host(0)
    probes = make_probes(host, 8)
    cfg = BackdoorConfig.for_polarity(Polarity.TRIGGER_ON_ZERO, logit_bound(host, probes))
    net = inject_backdoor(host, precision_detector(B32), cfg, probes)
    for x in probes:
        ref = argmax(reference_eval(host, x))
        clean = deploy_eval(DeployedNet(net, Environment(B64, NE, (LeftToRight(),))), x)[1]
        hit = deploy_eval(DeployedNet(net, Environment(B32, NE, (LeftToRight(),))), x)[1]
        _check(clean == ref and hit == (ref + 1) % host.n_classes, "backdoor argmax contract")


CHECKS: dict[str, Callable[[], None]] = {
    "worked-examples": worked_examples,
    "add-matches-rounding": add_matches_rounding,
    "mode-ordering": mode_ordering,
    "oracle-matches-enumeration": oracle_matches_enumeration,
    "ibp-contains-every-tree": ibp_contains_every_tree,
    "default-ibp-counterexample": default_ibp_counterexample,
    "decreasing-order-counterexample": decreasing_order_counterexample,
    "zonotope-widening": zonotope_widening,
    "detector-truth-table": detector_truth_table,
    "backdoor-contract": backdoor_contract,
}


# -- fault injection -------------------------------------------------------------


@contextlib.contextmanager
def _flip_ties() -> Iterator[None]:
    original = fpcore._rounds_up

    def faulty(mode, sign, below_half, is_half, lsb, inexact):
        if mode is NE and inexact and is_half:
            return lsb == 0
        return original(mode, sign, below_half, is_half, lsb, inexact)

    with mock.patch.object(fpcore, "_rounds_up", faulty):
        yield


@contextlib.contextmanager
def _ibp_nearest() -> Iterator[None]:
    def faulty(a, b):
        return verifiers.Interval(add(a.lo, b.lo, NE), add(a.hi, b.hi, NE))

    with mock.patch.object(verifiers, "_ibp_add", faulty):
        yield


@contextlib.contextmanager
def _round_up_always() -> Iterator[None]:
    original = fpcore._round_dyadic

    def faulty(sign, n, e, fmt, mode):
        return original(sign, n, e, fmt, RU if mode is RD else mode)

    with mock.patch.object(fpcore, "_round_dyadic", faulty):
        yield


FAULTS: dict[str, Callable[[], contextlib.AbstractContextManager]] = {
    "flip-ties": _flip_ties,
    "ibp-nearest": _ibp_nearest,
    "rd-as-ru": _round_up_always,
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    seconds: float
    message: str = ""


def run_selftest(fault: str | None = None) -> list[CheckResult]:
    ctx = FAULTS[fault]() if fault else contextlib.nullcontext()
    results = []
    with ctx:
        for name, check in CHECKS.items():
            start = time.perf_counter()
            try:
                check()
                results.append(CheckResult(name, True, time.perf_counter() - start))
            except Exception as exc:  # a fault may surface as any error, not only a failed check
                msg = str(exc) if isinstance(exc, AssertionError) else f"{type(exc).__name__}: {exc}"
                results.append(CheckResult(name, False, time.perf_counter() - start, msg))
    return results
