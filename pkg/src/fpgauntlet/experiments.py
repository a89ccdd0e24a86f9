"""Experiment runners behind the command-line tool.

Each runner turns a validated config into a list of flat report rows, in
config order. Rows hold only strings, integers and booleans so that JSON and
CSV renderings are byte-deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .config import ExperimentConfig, NetworkConfig
from .detectors import (
    DetectorKind,
    DetectorSpec,
    detector_value,
    omega_position_values,
    trigger_policies,
)
from .errors import ConfigError, SizeLimitError
from .exprtree import (
    AllTrees,
    Environment,
    ExprTree,
    Leaf,
    LeftToRight,
    Node,
    parse_policy,
    to_nested,
)
from .fpcore import FpValue, format_readable
from .network import (
    BackdoorConfig,
    DeployedNet,
    Network,
    argmax,
    deploy_eval,
    inject_backdoor,
    logit_bound,
    make_host,
    make_probes,
    reference_eval,
)
from .verifiers import VerifierKind, WitnessTree, check_soundness

VERIFY_COLUMNS = (
    "subject", "n", "environment", "verifier", "verifier_kind", "verifier_format",
    "verifier_tree", "lo", "hi", "reach_lo", "reach_hi", "method", "verdict", "side",
    "witness_value", "witness_tree",
)
NETLAB_COLUMNS = (
    "network", "detector", "polarity", "environment", "probes", "matches_host",
    "shifted", "behaviour", "expected", "ok",
)
DETECT_COLUMNS = (
    "detector", "environment", "value", "exact_value", "default_polarity", "zero_positions",
)


def lit(v: FpValue | Fraction | None) -> str:
    if v is None:
        return ""
    return format_readable(v.exact if isinstance(v, FpValue) else v)


def tree_text(tree: ExprTree | None) -> str:
    if tree is None:
        return ""
    return json.dumps(to_nested(tree), separators=(",", ":"))


@dataclass(frozen=True)
class Subject:
    name: str
    values: tuple[FpValue, ...]
    spec: DetectorSpec | None = None


def subjects(cfg: ExperimentConfig) -> list[Subject]:
    out = [Subject(d.name, d.build().weights, d.build()) for d in cfg.detectors]
    out += [Subject(v.name, tuple(v.build())) for v in cfg.value_sets]
    return out


def _tree_label(v: VerifierKind) -> str:
    tree = v.tree
    if isinstance(tree, WitnessTree):
        return tree.value
    if isinstance(tree, (Leaf, Node)):
        return tree_text(tree)
    return str(tree)


# -- verify ---------------------------------------------------------------------


def verify_row(subject: Subject, env: Environment, verifier: VerifierKind,
               scan: Sequence, limit: int) -> dict:
    row = {
        "subject": subject.name, "n": len(subject.values), "environment": str(env),
        "verifier": verifier.label, "verifier_kind": verifier.kind.value,
        "verifier_format": verifier.fmt.tag, "verifier_tree": _tree_label(verifier),
    }
    extra = list(scan) + (trigger_policies(subject.spec) if subject.spec else [])
    try:
        bound = verifier.bound(subject.values, env, limit)
        verdict = check_soundness(bound, subject.values, env, extra, limit)
    except SizeLimitError as exc:
        row.update({k: "" for k in VERIFY_COLUMNS if k not in row})
        row.update(verdict="skipped", method=f"size-limit: {exc}")
        return row
    witness = verdict.witness
    row.update(
        lo=lit(bound.lo), hi=lit(bound.hi), reach_lo=lit(verdict.lo), reach_hi=lit(verdict.hi),
        method=verdict.method, verdict=verdict.status.value, side=verdict.side.value,
        witness_value=lit(witness[1]) if witness else "",
        witness_tree=tree_text(witness[0]) if witness else "",
    )
    return row


def run_verify(cfg: ExperimentConfig) -> list[dict]:
    envs = [e.build() for e in cfg.environments]
    verifiers = [v.build() for v in cfg.verifiers]
    scan = [parse_policy(p) for p in cfg.scan]
    rows = []
    for subject in subjects(cfg):
        for env in envs:
            for verifier in verifiers:
                rows.append(verify_row(subject, env, verifier, scan, cfg.oracle_limit))
    return rows


def check_expectations(cfg: ExperimentConfig, rows: Sequence[dict]) -> list[str]:
    """Messages for every expectation in ``cfg`` that ``rows`` contradict."""
    failures = []
    for exp in cfg.expectations:
        hits = [r for r in rows if r["verifier"] == exp.verifier and r["subject"] == exp.subject
                and r["environment"] == exp.environment]
        if not hits:
            failures.append(f"no row for {exp.verifier} / {exp.subject} / {exp.environment}")
            continue
        row = hits[0]
        if row["verdict"] != exp.verdict or (exp.side and row["side"] != exp.side):
            want = exp.verdict + (f"/{exp.side}" if exp.side else "")
            failures.append(f"{exp.verifier} / {exp.subject} / {exp.environment}: "
                            f"expected {want}, got {row['verdict']}/{row['side']}")
    return failures


# -- netlab ---------------------------------------------------------------------


def _host(ncfg: NetworkConfig) -> Network:
    return Network.load(ncfg.path) if ncfg.path else make_host(ncfg.host_seed)


def run_netlab(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for ncfg in cfg.networks:
        host = _host(ncfg)
        probes = make_probes(host, ncfg.probes, ncfg.probe_seed)
        spec = cfg.detector(ncfg.detector) if ncfg.detector else None
        if spec is None:
            net, polarity = host, ""
        else:
            pol = ncfg.polarity_for(spec)
            bd = BackdoorConfig.for_polarity(pol, logit_bound(host, probes))
            net, polarity = inject_backdoor(host, spec, bd, probes), pol.value
        m = host.n_classes
        for ecfg in ncfg.environments:
            env = ecfg.build()
            host_dn, net_dn = DeployedNet(host, env, cfg.seed), DeployedNet(net, env, cfg.seed)
            same = shifted = 0
            for x in probes:
                # a bare host is compared with its exact real-arithmetic prediction
                ref = (argmax(reference_eval(host, x)) if spec is None
                       else deploy_eval(host_dn, x)[1])
                got = deploy_eval(net_dn, x)[1]
                same += got == ref
                shifted += got == (ref + 1) % m
            behaviour = ("clean" if same == len(probes) else
                         "shifted" if shifted == len(probes) else "mixed")
            expected = ncfg.expect.get(str(env), "")
            rows.append({
                "network": ncfg.name, "detector": ncfg.detector or "", "polarity": polarity,
                "environment": str(env), "probes": len(probes), "matches_host": same,
                "shifted": shifted, "behaviour": behaviour, "expected": expected,
                "ok": (behaviour == expected) if expected else True,
            })
    return rows


# -- detect ---------------------------------------------------------------------


def _ranges(positions: Sequence[int]) -> str:
    parts, start = [], None
    for i, p in enumerate(positions):
        if start is None:
            start = p
        if i + 1 == len(positions) or positions[i + 1] != p + 1:
            parts.append(str(start) if start == p else f"{start}-{p}")
            start = None
    return ",".join(parts)


def run_detect(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for dcfg in cfg.detectors:
        spec = dcfg.build()
        for ecfg in cfg.environments:
            env = ecfg.build()
            if all(isinstance(p, AllTrees) for p in env.policies):
                raise ConfigError(f"detect needs a concrete order policy, got {env}")
            zeros = ""
            if spec.kind in (DetectorKind.ORDER2, DetectorKind.ORDER3):
                scan_env = Environment(env.fmt, env.mode, (LeftToRight(),))
                hits = [pos for pos, v in enumerate(omega_position_values(spec, scan_env)) if v.is_zero]
                zeros = _ranges(hits) or "none"
            rows.append({
                "detector": dcfg.name, "environment": str(env),
                "value": lit(detector_value(spec, env, seed=cfg.seed)),
                "exact_value": lit(spec.exact_value),
                "default_polarity": spec.default_polarity.value, "zero_positions": zeros,
            })
    return rows

