"""Experiment configuration: a strict JSON schema with bit-exact round trips."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .sources import JointSource, SourceError, copy_source, dsbs, independent_bits, markov_bsc
from .swcodec import PairParams

EXPERIMENTS = ("region", "simulate", "sweep", "verify")
VERIFY_SUITES = ("admissible", "growth", "binning", "recovery", "repaint")

# family -> (required numeric fields, factory)
_FAMILIES = {
    "dsbs": (("crossover",), lambda d: dsbs(d["crossover"])),
    "copy": ((), lambda d: copy_source()),
    "independent": ((), lambda d: independent_bits()),
    "markov_bsc": (("flip", "crossover"), lambda d: markov_bsc(d["flip"], d["crossover"])),
}


class ConfigError(ValueError):
    pass


def source_from_spec(spec: dict) -> JointSource:
    """Build a source from ``{"family": ..., ...}``; ``family = "table"`` takes a full table."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError("source.family is required")
    fam = spec["family"]
    if fam == "table":
        extra = set(spec) - {"family", "table"}
        if extra:
            raise ConfigError(f"unknown source field(s): {sorted(extra)}")
        if "table" not in spec:
            raise ConfigError("source.table is required for family 'table'")
        try:
            return JointSource.from_dict(spec["table"])
        except SourceError as exc:
            raise ConfigError(f"source.table: {exc}") from exc
    if fam not in _FAMILIES:
        raise ConfigError(f"source.family {fam!r} not one of {sorted(_FAMILIES) + ['table']}")
    required, make = _FAMILIES[fam]
    extra = set(spec) - {"family", *required}
    if extra:
        raise ConfigError(f"unknown source field(s): {sorted(extra)}")
    for key in required:
        if key not in spec:
            raise ConfigError(f"source.{key} is required for family {fam!r}")
    try:
        return make(spec)
    except SourceError as exc:
        raise ConfigError(f"source: {exc}") from exc


def source_label(spec: dict) -> str:
    fam = spec.get("family", "?")
    args = ",".join(f"{k}={spec[k]}" for k in sorted(spec) if k not in ("family", "table"))
    return f"{fam}({args})" if args else fam


@dataclass
class ExperimentConfig:
    experiment: str = "simulate"
    source: dict = field(default_factory=lambda: {"family": "dsbs", "crossover": 0.11})
    orbit_length: int = 2_000_000
    seed: int = 0
    params: PairParams = field(default_factory=PairParams)
    grid: list = field(default_factory=lambda: [[2, 2]])
    suites: list = field(default_factory=lambda: list(VERIFY_SUITES))
    improve: bool = False
    train_test: bool = False
    threads: int = 1
    out: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.experiment != "verify":
            source_from_spec(self.source)
        if not isinstance(self.orbit_length, int) or self.orbit_length < 1:
            raise ConfigError("orbit_length must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for cell in self.grid:
            if not (isinstance(cell, (list, tuple)) and len(cell) == 2
                    and all(isinstance(v, int) and v >= 1 for v in cell)):
                raise ConfigError(f"grid cells must be [a, b] with positive integers, got {cell!r}")
        for s in self.suites:
            if s not in VERIFY_SUITES:
                raise ConfigError(f"suites: unknown suite {s!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        d = dict(d)
        try:
            d["params"] = PairParams.from_dict(d.get("params", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"params: {exc}") from exc
        return cls(**d).validate()

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_json(Path(path).read_text())
