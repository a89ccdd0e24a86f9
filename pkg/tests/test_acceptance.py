"""Acceptance suite: one test per acceptance criterion, all exact.

Every criterion prints a single PASS/FAIL line at the end of the run (also
when executed directly with ``python tests/test_acceptance.py``).
"""

from __future__ import annotations

import random
import sys
import time
from fractions import Fraction

import pytest

from fpgauntlet.detectors import (
    Polarity,
    detector_value,
    omega_first_order,
    omega_position_values,
    order1_detector,
    order2_detector,
    order3_detector,
    precision_detector,
)
from fpgauntlet.errors import FloatOverflowError
from fpgauntlet.exprtree import (
    AllTrees,
    Environment,
    LeftToRight,
    RandomTree,
    SortedDecreasing,
    build_tree,
    chain,
    evaluate,
)
from fpgauntlet.fpcore import ALL_MODES, B32, B64, NE, RD, RU, RZ, add, convert, fp, omega, round_exact
from fpgauntlet.network import (
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
from fpgauntlet.oracle import enumerate_all_trees, extremes, reachable_values
from fpgauntlet.sampling import adversarial_pair, summand
from fpgauntlet.verifiers import (
    Kind,
    Side,
    VerifierKind,
    WitnessTree,
    check_soundness,
    check_soundness_all,
    ibp_eval,
    symbolic_sum_eval,
    zono_eval,
)

W = omega(B64).exact
RESULTS: dict[int, tuple[bool, str, float]] = {}
EXTRA: list[str] = []

TITLES = {
    1: "worked examples (absorption, reordering, precision)",
    2: "default IBP misses an extreme of {1, 1, omega}",
    3: "decreasing order misses the minimum",
    4: "zonotope strictly wider than IBP, yet misses an extreme",
    5: "every tree inside its IBP interval; witnesses bound the extremes",
    6: "exhaustive oracle equals naive tree enumeration",
    7: "addition equals exact rounding; mode ordering",
    8: "detector truth table",
    9: "verdict matrix of verifiers against detectors",
    10: "backdoor argmax contract on 64 probes",
}


def b64(*xs):
    return [fp(x) for x in xs]


def env(mode=NE, *policies, fmt=B64):
    return Environment(fmt, mode, policies or (AllTrees(),))


def record(number: int, fn) -> None:
    start = time.perf_counter()
    try:
        detail = fn() or ""
    except BaseException as exc:
        RESULTS[number] = (False, f"{type(exc).__name__}: {exc}"[:160], time.perf_counter() - start)
        raise
    RESULTS[number] = (True, detail, time.perf_counter() - start)


def summary_lines() -> list[str]:
    lines = []
    for n in sorted(TITLES):
        if n not in RESULTS:
            lines.append(f"criterion {n:2d}: NOT RUN  {TITLES[n]}")
            continue
        ok, detail, secs = RESULTS[n]
        status = "PASS" if ok else "FAIL"
        lines.append(f"criterion {n:2d}: {status}  {TITLES[n]} [{secs:.1f}s]" + (f" -- {detail}" if detail else ""))
    return lines + EXTRA


@pytest.fixture(scope="module", autouse=True)
def _report(request):
    yield
    reporter = request.config.pluginmanager.getplugin("terminalreporter")
    if reporter is not None:
        reporter.write_line("")
        for line in summary_lines():
            reporter.write_line(line)


# -- 1 ------------------------------------------------------------------------------


def criterion_1():
    w = fp(W)
    vals = [w, fp(1), -w]
    for mode in (RD, NE):
        assert evaluate(chain([0, 1, 2]), vals, mode).exact == 0
    assert evaluate(chain([0, 2, 1]), vals, NE).exact == 1
    w32 = omega(B32)
    assert evaluate(chain([0, 1, 2]), [w32, fp(1, B32), -w32], NE).exact == 0
    assert evaluate(chain([0, 1, 2]), b64(2**24, 1, -(2**24)), NE).exact == 1


def test_criterion_1_worked_examples():
    record(1, criterion_1)


# -- 2 ------------------------------------------------------------------------------


def criterion_2():
    vals = b64(1, 1, W)
    bound = ibp_eval(chain([0, 1, 2]), vals, B64)
    assert (bound.lo.exact, bound.hi.exact) == (W + 2, W + 2)
    for mode in ALL_MODES:
        ex = extremes(vals, mode)
        verdict = check_soundness(bound, vals, env(mode))
        assert not verdict.sound
        tree, value = verdict.witness
        assert evaluate(tree, vals, mode) == value and not bound.contains(value)
        if mode is RU:
            assert ex.U_r.exact == W + 4 and verdict.side is Side.UPPER and value == ex.U_r
        else:
            assert ex.L_r.exact == W and verdict.side is Side.LOWER and value == ex.L_r


def test_criterion_2_default_ibp_counterexample():
    record(2, criterion_2)


# -- 3 ------------------------------------------------------------------------------


def criterion_3():
    vals = b64(W, 1.25, 1.25, 1.25)
    dec = evaluate(build_tree(SortedDecreasing(), vals), vals, NE)
    assert dec.exact == W + 6
    assert extremes(vals, NE).L_r.exact == W + 4
    vals = b64(W - 1, 3, 2)
    for mode in (RD, RZ):
        dec = evaluate(build_tree(SortedDecreasing(), vals), vals, mode)
        assert dec.exact == W + 4
        assert extremes(vals, mode).L_r.exact == W + 2


def test_criterion_3_decreasing_order_counterexamples():
    record(3, criterion_3)


# -- 4 ------------------------------------------------------------------------------


def criterion_4():
    rng = random.Random(404)
    for _ in range(10_000):
        fmt = rng.choice([B32, B64])
        n = rng.randint(2, 8)
        vals = [summand(rng, fmt) for _ in range(n)]
        tree = build_tree(RandomTree(rng.randrange(10**6)), vals)
        ibp = ibp_eval(tree, vals, fmt)
        zono = zono_eval(tree, vals, fmt)
        assert zono.lo.exact < ibp.lo.exact and ibp.hi.exact < zono.hi.exact
    ones = b64(*([1] * 9 + [W]))
    iv = zono_eval(chain(range(10)), ones, B64)
    for mode in (RD, RZ, NE):
        lr = extremes(ones, mode).L_r
        assert lr.exact == W and iv.lo.exact > lr.exact
    tenths = [fp(1.1)] * 9 + [fp(W)]
    iv = zono_eval(chain(range(10)), tenths, B64)
    for mode in (RU, NE):
        ur = extremes(tenths, mode).U_r
        assert ur.exact == W + 18 and iv.hi.exact < ur.exact
    return "10000 strict containments"


def test_criterion_4_zonotope():
    record(4, criterion_4)


# -- 5 ------------------------------------------------------------------------------


def criterion_5():
    rng = random.Random(505)
    trees = {n: list(enumerate_all_trees(n)) for n in range(1, 6)}
    cases = 0
    for i in range(200):
        n = 1 + i % 5
        fmt = B64 if i % 3 else B32
        vals = [summand(rng, fmt) for _ in range(n)]
        exact = sum(v.exact for v in vals)
        for t in trees[n]:
            iv = ibp_eval(t, vals, fmt)
            assert iv.contains(exact)
            for mode in ALL_MODES:
                assert iv.contains(evaluate(t, vals, mode))
        for mode in ALL_MODES:
            ex = extremes(vals, mode)
            assert ibp_eval(ex.min_witness, vals, fmt).lo <= ex.L_r
            assert ibp_eval(ex.max_witness, vals, fmt).hi >= ex.U_r
        cases += 1
    return f"{cases} multisets, n <= 5"


def test_criterion_5_interval_containment():
    record(5, criterion_5)


# -- 6 ------------------------------------------------------------------------------


def criterion_6():
    trees = {n: list(enumerate_all_trees(n)) for n in range(1, 6)}
    checked = 0
    for fmt in (B32, B64):
        for mode in ALL_MODES:
            rng = random.Random(f"oracle-{fmt.tag}-{mode.value}")
            for i in range(200):
                n = 1 + i % 5
                vals = [summand(rng, fmt) for _ in range(n)]
                naive = {evaluate(t, vals, mode) for t in trees[n]}
                assert reachable_values(vals, mode).values == naive, (fmt, mode, vals)
                checked += 1
    return f"{checked} cases"


def test_criterion_6_oracle_matches_enumeration():
    record(6, criterion_6)


# -- 7 ------------------------------------------------------------------------------


def criterion_7():
    total = 0
    for fmt in (B32, B64):
        rng = random.Random(f"pairs-{fmt.tag}")
        for _ in range(100_000):
            a, b = adversarial_pair(rng, fmt)
            q = a.exact + b.exact
            got = {}
            for mode in ALL_MODES:
                try:
                    r = add(a, b, mode)
                except FloatOverflowError:
                    with pytest.raises(FloatOverflowError):
                        round_exact(q, fmt, mode)
                    continue
                assert r == round_exact(q, fmt, mode), (a, b, mode)
                got[mode] = r
            if len(got) == 4:
                lo, ne, hi, tz = got[RD], got[NE], got[RU], got[RZ]
                assert lo.exact <= q <= hi.exact and lo <= ne <= hi
                assert tz == (lo if q >= 0 else hi)
                assert (lo == hi) == (lo.exact == q)
            total += 1
    return f"{total} pairs x 4 modes"


def test_criterion_7_addition_matches_rounding():
    record(7, criterion_7)


# -- 8 ------------------------------------------------------------------------------


def criterion_8():
    ltr = LeftToRight()
    prec = precision_detector(B32)
    for mode in (NE, RD, RZ):
        assert detector_value(prec, env(mode, ltr, fmt=B32)).exact == 0
    for mode in ALL_MODES:
        assert detector_value(prec, env(mode, ltr, fmt=B64)).exact == 1
    o1 = order1_detector(4, 15)
    assert o1.exact_value == 15
    for mode in (NE, RD, RZ):
        assert detector_value(o1, env(mode, ltr)).exact == 0
    o2, o3 = order2_detector(512), order3_detector(512)
    e = env(NE, ltr)
    assert detector_value(o2, e).exact == 2
    assert detector_value(o3, e).exact == 512
    v2, v3 = omega_position_values(o2, e), omega_position_values(o3, e)
    assert [pos for pos, v in enumerate(v2) if v.is_zero] == list(range(257))
    assert [pos for pos, v in enumerate(v3) if v.is_zero] == [0, 1]
    # spot-check the scan against plain tree evaluation
    for pos in (0, 1, 2, 3, 255, 256, 257, 258, 400, 512):
        assert v2[pos] == detector_value(o2, e, omega_first_order(o2, pos))
        assert v3[pos] == detector_value(o3, e, omega_first_order(o3, pos))
    return "order2 zero at positions 0..256, order3 at 0..1 (0-based)"


def test_criterion_8_detector_truth_table():
    record(8, criterion_8)


# -- 9 ------------------------------------------------------------------------------

VERIFIERS = {
    "IBP-default-B64": VerifierKind(Kind.IBP, B64, LeftToRight()),
    "IBP-default-B32": VerifierKind(Kind.IBP, B32, LeftToRight()),
    "IBP-min-witness": VerifierKind(Kind.IBP, B64, WitnessTree.MIN),
    "Zonotope-default": VerifierKind(Kind.ZONOTOPE, B64, LeftToRight()),
    "SymbolicSum": VerifierKind(Kind.SYMBOLIC_SUM, B64, LeftToRight()),
}


def _matrix():
    ltr = LeftToRight()
    subjects = {
        "Precision(B32)": (precision_detector(B32), [env(NE, ltr, fmt=B32), env(NE, ltr, fmt=B64)]),
        "Order1(2,2)": (order1_detector(2, 2), [env(NE)]),
        "Order2(4)": (order2_detector(4), [env(NE)]),
        "Order3(4)": (order3_detector(4), [env(NE)]),
    }
    cells = {}
    for vname, verifier in VERIFIERS.items():
        for sname, (spec, deployments) in subjects.items():
            vals = list(spec.weights)
            verdicts = []
            for dep in deployments:
                bound = verifier.bound(vals, dep)
                verdict = check_soundness(bound, vals, dep)
                deployed = [convert(v, dep.fmt) for v in vals]
                # justify the cell independently of the judge
                if dep.all_trees:
                    outputs = reachable_values(deployed, dep.mode).values
                else:
                    outputs = {evaluate(build_tree(p, deployed), deployed, dep.mode) for p in dep.policies}
                escaped = [v for v in outputs if not bound.contains(v)]
                assert verdict.sound == (not escaped)
                for tree, value in verdict.witnesses:
                    assert evaluate(tree, deployed, dep.mode) == value and not bound.contains(value)
                verdicts.append((bound, verdict))
            sound = all(v.sound for _, v in verdicts)
            if len({b for b, _ in verdicts}) == 1:
                assert check_soundness_all(verdicts[0][0], vals, deployments).sound == sound
            cells[(vname, sname)] = (sound, [b for b, _ in verdicts])
    return cells


def criterion_9():
    cells = _matrix()
    ok = {k: v[0] for k, v in cells.items()}
    assert ok[("IBP-default-B64", "Order1(2,2)")]
    assert not ok[("IBP-default-B64", "Order2(4)")]
    assert not ok[("IBP-default-B64", "Order3(4)")]
    for vname in ("IBP-default-B64", "IBP-min-witness", "Zonotope-default", "SymbolicSum"):
        assert not ok[(vname, "Precision(B32)")], vname
    for sname in ("Precision(B32)", "Order1(2,2)", "Order2(4)", "Order3(4)"):
        assert cells[("SymbolicSum", sname)] == cells[("IBP-default-B64", sname)]
        spec_vals = {"Precision(B32)": precision_detector(B32), "Order1(2,2)": order1_detector(2, 2),
                     "Order2(4)": order2_detector(4), "Order3(4)": order3_detector(4)}[sname].weights
        tree = chain(range(len(spec_vals)))
        assert symbolic_sum_eval(spec_vals, tree, B64) == ibp_eval(tree, spec_vals, B64)
    header = "".join(f"{s:>16}" for s in ("Precision(B32)", "Order1(2,2)", "Order2(4)", "Order3(4)"))
    rows = [f"{'':18}{header}"]
    for vname in VERIFIERS:
        rows.append(f"{vname:18}" + "".join(
            f"{'sound' if ok[(vname, s)] else 'UNSOUND':>16}"
            for s in ("Precision(B32)", "Order1(2,2)", "Order2(4)", "Order3(4)")))
    EXTRA[:] = ["", "verdict matrix (criterion 9):"] + rows
    unsound = sum(not v for v in ok.values())
    return f"{unsound}/{len(ok)} cells unsound"


def test_criterion_9_verdict_matrix():
    record(9, criterion_9)


# -- 10 -----------------------------------------------------------------------------


def criterion_10():
    host = make_host(0)
    probes = make_probes(host, 64, seed=0)
    bound = logit_bound(host, probes)
    m = host.n_classes
    ref = [argmax(reference_eval(host, x)) for x in probes]
    cases = [
        (precision_detector(B32), env(NE, LeftToRight(), fmt=B64), env(NE, LeftToRight(), fmt=B32)),
        (order2_detector(16), env(NE, LeftToRight()), env(NE, SortedDecreasing())),
    ]
    for spec, clean_env, trigger_env in cases:
        cfg = BackdoorConfig.for_polarity(Polarity.TRIGGER_ON_ZERO, bound)
        net = inject_backdoor(host, spec, cfg, probes)
        for x, r in zip(probes, ref):
            host_clean = deploy_eval(DeployedNet(host, clean_env), x)[1]
            host_trig = deploy_eval(DeployedNet(host, trigger_env), x)[1]
            assert host_clean == host_trig == r
            assert deploy_eval(DeployedNet(net, clean_env), x)[1] == host_clean
            assert deploy_eval(DeployedNet(net, trigger_env), x)[1] == (host_trig + 1) % m
    return "64/64 clean and 64/64 shifted for precision and order2 backdoors"


def test_criterion_10_backdoor_contract():
    record(10, criterion_10)


if __name__ == "__main__":
    failed = False
    for n in sorted(TITLES):
        try:
            record(n, globals()[f"criterion_{n}"])
        except BaseException:
            failed = True
    print("\n".join(summary_lines()))
    sys.exit(1 if failed else 0)
