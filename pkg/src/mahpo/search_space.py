"""Hyperparameter domains, configurations, seeded sampling and normalized distance."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

Scalar = Union[float, int, str]


class ModelFamily(str, enum.Enum):
    LOGISTIC_REGRESSION = "logistic_regression"
    RANDOM_FOREST = "random_forest"


FAMILY_ORDER = (ModelFamily.LOGISTIC_REGRESSION, ModelFamily.RANDOM_FOREST)


class InvalidConfiguration(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration: " + "; ".join(self.violations))


@dataclass(frozen=True)
class Continuous:
    low: float
    high: float
    scale: str = "linear"

    def __post_init__(self):
        if self.scale not in ("linear", "log10"):
            raise ValueError(f"unknown scale {self.scale!r}")
        if not (math.isfinite(self.low) and math.isfinite(self.high)) or not self.low < self.high:
            raise ValueError(f"continuous domain needs low < high, got [{self.low}, {self.high}]")
        if self.scale == "log10" and self.low <= 0:
            raise ValueError("log10 scale requires low > 0")

    @property
    def log(self) -> bool:
        return self.scale == "log10"

    def contains(self, value) -> bool:
        return self.low <= value <= self.high

    def normalize(self, value: float) -> float:
        if self.log:
            lo, hi = math.log10(self.low), math.log10(self.high)
            return (math.log10(value) - lo) / (hi - lo)
        return (value - self.low) / (self.high - self.low)

    def denormalize(self, u: float) -> float:
        u = min(max(u, 0.0), 1.0)
        if self.log:
            lo, hi = math.log10(self.low), math.log10(self.high)
            return min(max(10.0 ** (lo + u * (hi - lo)), self.low), self.high)
        return self.low + u * (self.high - self.low)

    def sample(self, rng: np.random.Generator) -> float:
        if self.log:
            return float(10.0 ** rng.uniform(math.log10(self.low), math.log10(self.high)))
        return float(rng.uniform(self.low, self.high))

    def to_json(self):
        return {"type": "continuous", "low": self.low, "high": self.high, "scale": self.scale}


@dataclass(frozen=True)
class Integer:
    low: int
    high: int

    def __post_init__(self):
        if isinstance(self.low, bool) or isinstance(self.high, bool):
            raise ValueError("integer bounds must be ints")
        if not self.low < self.high:
            raise ValueError(f"integer domain needs low < high, got [{self.low}, {self.high}]")

    def contains(self, value) -> bool:
        return self.low <= value <= self.high

    def normalize(self, value: int) -> float:
        return (value - self.low) / (self.high - self.low)

    def denormalize(self, u: float) -> int:
        u = min(max(u, 0.0), 1.0)
        return int(min(max(round(self.low + u * (self.high - self.low)), self.low), self.high))

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.low, self.high, endpoint=True))

    def to_json(self):
        return {"type": "integer", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class Categorical:
    choices: tuple

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(self.choices))
        if not self.choices:
            raise ValueError("categorical domain needs at least one choice")
        if len(set(self.choices)) != len(self.choices):
            raise ValueError("categorical choices must be unique")
        if not all(isinstance(c, str) for c in self.choices):
            raise ValueError("categorical choices must be strings")

    def contains(self, value) -> bool:
        return value in self.choices

    def sample(self, rng: np.random.Generator) -> str:
        return self.choices[int(rng.integers(len(self.choices)))]

    def to_json(self):
        return {"type": "categorical", "choices": list(self.choices)}


ParamDomain = Union[Continuous, Integer, Categorical]


@dataclass(frozen=True)
class SearchSpace:
    family: ModelFamily
    params: Mapping[str, ParamDomain]

    def __post_init__(self):
        object.__setattr__(self, "family", ModelFamily(self.family))
        # dict preserves insertion order, which fixes serialization order
        object.__setattr__(self, "params", dict(self.params))

    @property
    def names(self) -> list[str]:
        return list(self.params)

    def to_json(self):
        return {"family": self.family.value,
                "params": {name: dom.to_json() for name, dom in self.params.items()}}


@dataclass(frozen=True)
class Configuration:
    family: ModelFamily
    values: Mapping[str, Scalar] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", ModelFamily(self.family))
        object.__setattr__(self, "values", dict(self.values))

    def to_json(self) -> dict:
        space = default_space(self.family)
        ordered = {n: self.values[n] for n in space.params if n in self.values}
        ordered.update({n: v for n, v in self.values.items() if n not in ordered})
        return {"family": self.family.value, "values": ordered}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj: dict) -> "Configuration":
        return cls(ModelFamily(obj["family"]), dict(obj["values"]))

    @classmethod
    def loads(cls, text: str) -> "Configuration":
        return cls.from_json(json.loads(text))


def default_space(family) -> SearchSpace:
    family = ModelFamily(family)
    if family is ModelFamily.LOGISTIC_REGRESSION:
        return SearchSpace(family, {
            "c": Continuous(1e-4, 1e4, "log10"),
            "max_iter": Integer(100, 1000),
        })
    return SearchSpace(family, {
        "n_estimators": Integer(10, 300),
        "max_depth": Integer(2, 32),
        "min_samples_split": Integer(2, 10),
        "max_features": Categorical(("sqrt", "log2", "all")),
    })


def sample(space: SearchSpace, rng: np.random.Generator) -> Configuration:
    """Draw every parameter independently from its domain."""
    return Configuration(space.family, {name: dom.sample(rng) for name, dom in space.params.items()})


def _kind_ok(domain: ParamDomain, value) -> bool:
    if isinstance(value, bool):
        return False
    if isinstance(domain, Continuous):
        return isinstance(value, (int, float, np.integer, np.floating)) and math.isfinite(value)
    if isinstance(domain, Integer):
        return isinstance(value, (int, np.integer))
    return isinstance(value, str)


def validate(space: SearchSpace, config: Configuration) -> list[str]:
    """Return every violation of ``config`` against ``space``; empty means valid."""
    violations = []
    if config.family != space.family:
        violations.append(f"family: expected {space.family.value}, got {config.family.value}")
    for name in config.values:
        if name not in space.params:
            violations.append(f"{name}: unknown parameter")
    for name, dom in space.params.items():
        if name not in config.values:
            violations.append(f"{name}: missing parameter")
            continue
        value = config.values[name]
        if not _kind_ok(dom, value):
            violations.append(f"{name}: wrong kind ({type(value).__name__})")
        elif not dom.contains(value):
            violations.append(f"{name}: out of range ({value!r})")
    return violations


def distance(space: SearchSpace, a: Configuration, b: Configuration) -> float:
    """Mean per-parameter gap in normalized coordinates; 1 across families."""
    if a.family != b.family:
        return 1.0
    for cfg in (a, b):
        problems = validate(space, cfg)
        if problems:
            raise InvalidConfiguration(problems)
    total = 0.0
    for name, dom in space.params.items():
        va, vb = a.values[name], b.values[name]
        if isinstance(dom, Categorical):
            total += 0.0 if va == vb else 1.0
        else:
            total += abs(dom.normalize(va) - dom.normalize(vb))
    return total / len(space.params)
