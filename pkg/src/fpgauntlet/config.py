"""Experiment configuration schema.

Configs are JSON documents validated with pydantic; unknown keys are errors.
Numeric summands are written as decimal or dyadic literals (``"1.25"``,
``"3*2^-4"``, ``"2^53-1"``) or plain JSON integers and must be exactly
representable in the stated format. JSON floats are refused, since they
would already have been rounded by the parser.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, StrictInt, ValidationError, field_validator

from .detectors import DetectorSpec, Polarity, make_detector
from .errors import ConfigError, FpGauntletError
from .exprtree import Environment, OrderPolicy, from_nested, parse_policy
from .fpcore import FloatFormat, FpValue, RoundingMode, parse_literal
from .oracle import DEFAULT_LIMIT
from .verifiers import Kind, VerifierKind, WitnessTree

FormatTag = Literal["b32", "b64"]
ModeTag = Literal["ne", "rd", "ru", "rz"]
Literal_ = Union[StrictInt, str]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class EnvironmentConfig(_Model):
    format: FormatTag = "b64"
    mode: ModeTag = "ne"
    policies: list[str] = Field(default_factory=lambda: ["ltr"], min_length=1)

    @field_validator("policies")
    @classmethod
    def _known_policies(cls, v: list[str]) -> list[str]:
        for text in v:
            parse_policy(text)
        return v

    def build(self) -> Environment:
        return Environment(FloatFormat.from_tag(self.format), RoundingMode.from_tag(self.mode),
                           tuple(parse_policy(p) for p in self.policies))


def _parse_tree_choice(text: str) -> OrderPolicy | WitnessTree | object:
    if text in (w.value for w in WitnessTree):
        return WitnessTree(text)
    if text.startswith("["):
        return from_nested(json.loads(text))
    return parse_policy(text)


class VerifierConfig(_Model):
    kind: Literal["ibp", "zonotope", "symbolic"]
    format: FormatTag = "b64"
    tree: str = "ltr"
    name: str = ""

    @field_validator("tree")
    @classmethod
    def _known_tree(cls, v: str) -> str:
        try:
            _parse_tree_choice(v)
        except (ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"bad verifier tree {v!r}: {exc}") from exc
        return v

    def build(self) -> VerifierKind:
        return VerifierKind(Kind(self.kind), FloatFormat.from_tag(self.format),
                            _parse_tree_choice(self.tree), self.name)


class DetectorConfig(_Model):
    name: str
    kind: Literal["precision", "order1", "order2", "order3"]
    target: Optional[FormatTag] = None
    h: Optional[int] = None
    h1: Optional[int] = None
    h2: Optional[int] = None
    fmt: Optional[FormatTag] = None

    def build(self) -> DetectorSpec:
        params = {k: getattr(self, k) for k in ("target", "h", "h1", "h2", "fmt")
                  if getattr(self, k) is not None}
        return make_detector(self.kind, **params)


class ValueSetConfig(_Model):
    name: str
    format: FormatTag = "b64"
    values: list[Literal_] = Field(min_length=1)

    @field_validator("values")
    @classmethod
    def _lossless(cls, v: list, info) -> list:
        fmt = FloatFormat.from_tag(info.data.get("format", "b64"))
        for item in v:
            parse_literal(str(item), fmt)
        return v

    def build(self) -> list[FpValue]:
        fmt = FloatFormat.from_tag(self.format)
        return [parse_literal(str(x), fmt) for x in self.values]


class NetworkConfig(_Model):
    name: str
    host_seed: int = 0
    path: Optional[str] = None
    detector: Optional[str] = None
    polarity: Optional[Literal["nonzero", "zero"]] = None
    probes: int = Field(default=64, ge=1)
    probe_seed: int = 0
    environments: list[EnvironmentConfig] = Field(default_factory=list)
    expect: dict[str, Literal["clean", "shifted"]] = Field(default_factory=dict)

    def polarity_for(self, spec: DetectorSpec) -> Polarity:
        return Polarity(self.polarity) if self.polarity else spec.default_polarity


class ExpectationConfig(_Model):
    verifier: str
    subject: str
    environment: str
    verdict: Literal["sound", "unsound"]
    side: Optional[Literal["none", "lower", "upper", "both"]] = None


class OutputConfig(_Model):
    path: Optional[str] = None
    format: Literal["json", "csv"] = "json"


class ExperimentConfig(_Model):
    seed: int = 0
    environments: list[EnvironmentConfig] = Field(default_factory=list)
    verifiers: list[VerifierConfig] = Field(default_factory=list)
    detectors: list[DetectorConfig] = Field(default_factory=list)
    value_sets: list[ValueSetConfig] = Field(default_factory=list)
    networks: list[NetworkConfig] = Field(default_factory=list)
    scan: list[str] = Field(default_factory=list)
    oracle_limit: int = Field(default=DEFAULT_LIMIT, ge=0)
    output: OutputConfig = Field(default_factory=OutputConfig)
    expectations: list[ExpectationConfig] = Field(default_factory=list)

    @field_validator("scan")
    @classmethod
    def _known_scan(cls, v: list[str]) -> list[str]:
        for text in v:
            parse_policy(text)
        return v

    def detector(self, name: str) -> DetectorSpec:
        for d in self.detectors:
            if d.name == name:
                return d.build()
        raise ConfigError(f"no detector named {name!r}")

    def dump(self) -> dict:
        return self.model_dump(mode="json")

    def canonical(self) -> str:
        return json.dumps(self.dump(), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def parse_config(obj: dict) -> ExperimentConfig:
    """Validate a decoded JSON config; every problem surfaces as ``ConfigError``."""
    try:
        cfg = ExperimentConfig.model_validate(obj)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        # materialize everything once so semantic errors surface at load time
        for e in cfg.environments:
            e.build()
        for v in cfg.verifiers:
            v.build()
        for d in cfg.detectors:
            d.build()
        for n in cfg.networks:
            if n.detector is not None:
                cfg.detector(n.detector)
            for e in n.environments:
                e.build()
    except FpGauntletError as exc:
        raise ConfigError(str(exc)) from exc
    names = [d.name for d in cfg.detectors] + [v.name for v in cfg.value_sets]
    if len(set(names)) != len(names):
        raise ConfigError("detector and value-set names must be unique")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(obj)
