"""Built-in experiment configs used when ``--config`` is omitted.

The same documents are shipped as JSON under ``configs/`` in the source tree.
"""

from __future__ import annotations

import copy

VERIFIERS = [
    {"name": "ibp-default-b64", "kind": "ibp", "format": "b64", "tree": "ltr"},
    {"name": "ibp-default-b32", "kind": "ibp", "format": "b32", "tree": "ltr"},
    {"name": "ibp-min-witness", "kind": "ibp", "format": "b64", "tree": "min-witness"},
    {"name": "zonotope-default", "kind": "zonotope", "format": "b64", "tree": "ltr"},
    {"name": "symbolic-sum", "kind": "symbolic", "format": "b64", "tree": "ltr"},
]

SMALL_DETECTORS = [
    {"name": "precision-b32", "kind": "precision", "target": "b32"},
    {"name": "order1-small", "kind": "order1", "h1": 2, "h2": 2},
    {"name": "order2-small", "kind": "order2", "h": 4},
    {"name": "order3-small", "kind": "order3", "h": 4},
]

ALL_TREES = {"format": "b64", "mode": "ne", "policies": ["all"]}
B32_LTR = {"format": "b32", "mode": "ne", "policies": ["ltr"]}
B64_LTR = {"format": "b64", "mode": "ne", "policies": ["ltr"]}


def _expect(verifier: str, subject: str, environment: str, verdict: str, side: str | None = None):
    out = {"verifier": verifier, "subject": subject, "environment": environment, "verdict": verdict}
    if side:
        out["side"] = side
    return out


VERIFY = {
    "seed": 0,
    "environments": [ALL_TREES, B32_LTR, B64_LTR],
    "verifiers": VERIFIERS,
    "detectors": SMALL_DETECTORS,
    "value_sets": [
        {"name": "one-one-omega", "values": ["1", "1", "2^53"]},
        {"name": "omega-and-quarters", "values": ["2^53", "1.25", "1.25", "1.25"]},
    ],
    "scan": ["ltr", "sorted-dec", "sorted-dec-abs", "balanced"],
    "oracle_limit": 14,
    "expectations": [
        _expect("ibp-default-b64", "order1-small", "b64/ne/all", "sound"),
        _expect("ibp-default-b64", "order2-small", "b64/ne/all", "unsound", "both"),
        _expect("ibp-default-b64", "order3-small", "b64/ne/all", "unsound", "both"),
        _expect("ibp-default-b64", "precision-b32", "b32/ne/ltr", "unsound", "lower"),
        _expect("symbolic-sum", "order2-small", "b64/ne/all", "unsound", "both"),
        _expect("ibp-default-b64", "one-one-omega", "b64/ne/all", "unsound", "lower"),
        _expect("ibp-min-witness", "one-one-omega", "b64/ne/all", "sound"),
    ],
}

DETECT = {
    "seed": 0,
    "environments": [
        B32_LTR,
        {"format": "b64", "mode": "ne", "policies": ["ltr"]},
        {"format": "b64", "mode": "rd", "policies": ["ltr"]},
        {"format": "b64", "mode": "ru", "policies": ["ltr"]},
        {"format": "b64", "mode": "rz", "policies": ["ltr"]},
    ],
    "detectors": [
        {"name": "precision-b32", "kind": "precision", "target": "b32"},
        {"name": "order1", "kind": "order1", "h1": 4, "h2": 15},
        {"name": "order2", "kind": "order2", "h": 512},
        {"name": "order3", "kind": "order3", "h": 512},
    ],
}

_HOST_ENVS = [
    B64_LTR, B32_LTR,
    {"format": "b64", "mode": "ne", "policies": ["balanced"]},
    {"format": "b64", "mode": "rd", "policies": ["sorted-dec"]},
]

NETLAB = {
    "seed": 0,
    "detectors": [
        {"name": "precision-b32", "kind": "precision", "target": "b32"},
        {"name": "order1", "kind": "order1", "h1": 4, "h2": 15},
        {"name": "order2", "kind": "order2", "h": 64},
    ],
    "networks": [
        {"name": "host", "environments": _HOST_ENVS,
         "expect": {"b64/ne/ltr": "clean", "b32/ne/ltr": "clean", "b64/ne/balanced": "clean",
                    "b64/rd/sorted-dec": "clean"}},
        {"name": "precision-backdoor", "detector": "precision-b32",
         "environments": [B64_LTR, B32_LTR],
         "expect": {"b64/ne/ltr": "clean", "b32/ne/ltr": "shifted"}},
        {"name": "order1-backdoor", "detector": "order1",
         "environments": [B64_LTR, {"format": "b64", "mode": "ne", "policies": ["sorted-dec-abs"]}],
         "expect": {"b64/ne/ltr": "clean", "b64/ne/sorted-dec-abs": "shifted"}},
        {"name": "order2-backdoor", "detector": "order2",
         "environments": [B64_LTR, {"format": "b64", "mode": "ne", "policies": ["sorted-dec"]}],
         "expect": {"b64/ne/ltr": "clean", "b64/ne/sorted-dec": "shifted"}},
    ],
}

DEFAULTS = {"verify": VERIFY, "detect": DETECT, "netlab": NETLAB}


def default_config(command: str) -> dict:
    return copy.deepcopy(DEFAULTS[command])
