"""Joint architecture + training-hyperparameter search space.

A space is an ordered list of parameters: categoricals (head, optimizer,
block operations) and log-ranged continuous values (learning rates) that
may be conditional on an earlier categorical. Configurations are plain
dicts mapping parameter name to value; inactive conditionals are absent.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

Configuration = dict  # parameter name -> str (categorical) | float (continuous)

KIND_CATEGORICAL = "categorical"
KIND_LOG_RANGE = "continuous-log-range"

BLOCK_OPS = (
    "BnConv1x1", "Conv1x1Bn", "Conv1x1",
    "BnConv3x3", "Conv3x3Bn", "Conv3x3",
    "BnConv5x5", "Conv5x5Bn", "Conv5x5",
)

# Sentinel encoding for a conditional continuous parameter that is inactive.
INACTIVE_SENTINEL = 0.5


class SpaceError(ValueError):
    """Raised for malformed space definitions or un-encodable configurations."""


@dataclass(frozen=True)
class Condition:
    """Activates a parameter when ``parent`` takes one of ``equals``."""

    parent: str
    equals: tuple[str, ...]

    def holds(self, config: Configuration) -> bool:
        return config.get(self.parent) in self.equals


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    kind: str
    choices: tuple[str, ...] = ()
    bounds: tuple[float, float] = (0.0, 0.0)
    condition: Condition | None = None

    def __post_init__(self):
        if self.kind == KIND_CATEGORICAL:
            if len(self.choices) < 1:
                raise SpaceError(f"parameter {self.name!r}: empty choice list")
        elif self.kind == KIND_LOG_RANGE:
            low, high = self.bounds
            if not (0.0 < low < high):
                raise SpaceError(
                    f"parameter {self.name!r}: log-range bounds must satisfy "
                    f"0 < low < high, got {self.bounds}"
                )
        else:
            raise SpaceError(f"parameter {self.name!r}: unknown kind {self.kind!r}")


class SearchSpace:
    """Immutable ordered parameter collection; all operations are pure."""

    def __init__(self, name: str, parameters: Sequence[ParameterSpec]):
        self.name = name
        self.parameters = tuple(parameters)
        seen: set[str] = set()
        for p in self.parameters:
            if p.name in seen:
                raise SpaceError(f"duplicate parameter name {p.name!r}")
            if p.condition is not None:
                if p.condition.parent not in seen:
                    raise SpaceError(
                        f"parameter {p.name!r}: condition parent "
                        f"{p.condition.parent!r} not declared earlier"
                    )
            seen.add(p.name)
        self._by_name = {p.name: p for p in self.parameters}

    def __repr__(self):
        return f"SearchSpace({self.name!r}, {len(self.parameters)} parameters)"

    def parameter(self, name: str) -> ParameterSpec:
        return self._by_name[name]

    def active_parameters(self, config: Configuration) -> Iterator[ParameterSpec]:
        for p in self.parameters:
            if p.condition is None or p.condition.holds(config):
                yield p

    # -- sampling ---------------------------------------------------------

    def sample(self, rng: np.random.Generator) -> Configuration:
        """Draw a valid configuration: categoricals uniform, continuous
        log-uniform within the active range."""
        config: Configuration = {}
        for p in self.parameters:
            if p.condition is not None and not p.condition.holds(config):
                continue
            config[p.name] = self._sample_value(p, rng)
        return config

    def _sample_value(self, p: ParameterSpec, rng: np.random.Generator):
        if p.kind == KIND_CATEGORICAL:
            return p.choices[int(rng.integers(len(p.choices)))]
        low, high = p.bounds
        return float(math.exp(rng.uniform(math.log(low), math.log(high))))

    def perturb(self, config: Configuration, rng: np.random.Generator) -> Configuration:
        """Resample exactly one active parameter.

        Categoricals move to a different choice uniformly; continuous values
        are multiplied by a log-normal factor (sigma 0.2) and clamped to
        their range. Conditionals invalidated by a categorical move are
        dropped and newly active ones drawn fresh.
        """
        active = [p for p in self.active_parameters(config)]
        target = active[int(rng.integers(len(active)))]
        new = dict(config)
        if target.kind == KIND_CATEGORICAL:
            others = [c for c in target.choices if c != config[target.name]]
            if others:
                new[target.name] = others[int(rng.integers(len(others)))]
        else:
            low, high = target.bounds
            value = config[target.name] * math.exp(rng.normal(0.0, 0.2))
            new[target.name] = float(min(max(value, low), high))
        for p in self.parameters:
            if p.condition is None:
                continue
            if p.condition.holds(new):
                if p.name not in new:
                    new[p.name] = self._sample_value(p, rng)
            else:
                new.pop(p.name, None)
        return new

    # -- validation -------------------------------------------------------

    def validate(self, config: Configuration) -> list[str]:
        """Return the list of violated constraints (empty means valid)."""
        violations: list[str] = []
        for key in config:
            if key not in self._by_name:
                violations.append(f"unknown parameter {key!r}")
        for p in self.parameters:
            active = p.condition is None or p.condition.holds(config)
            present = p.name in config
            if active and not present:
                violations.append(f"missing required parameter {p.name!r}")
                continue
            if not active:
                if present:
                    violations.append(
                        f"{p.name!r} assigned but its condition "
                        f"({p.condition.parent}={'|'.join(p.condition.equals)}) does not hold"
                    )
                continue
            value = config[p.name]
            if p.kind == KIND_CATEGORICAL:
                if value not in p.choices:
                    violations.append(f"{p.name}={value!r} not among choices")
            else:
                low, high = p.bounds
                if not isinstance(value, (int, float)):
                    violations.append(f"{p.name}={value!r} is not a number")
                elif value < low:
                    violations.append(f"{p.name}={value} below range low {low}")
                elif value > high:
                    violations.append(f"{p.name}={value} above range high {high}")
        return violations

    def check(self, config: Configuration) -> None:
        violations = self.validate(config)
        if violations:
            raise SpaceError("invalid configuration: " + "; ".join(violations))

    # -- numeric encoding --------------------------------------------------

    @property
    def encoding_width(self) -> int:
        width = 0
        for p in self.parameters:
            if p.kind == KIND_CATEGORICAL:
                width += len(p.choices)
            else:
                width += 2 if p.condition is not None else 1
        return width

    def encode(self, config: Configuration) -> np.ndarray:
        """Map a valid configuration to a fixed-width vector in [0, 1].

        Categoricals become one-hot blocks (all zero when inactive).
        Continuous values are log-scaled into [0, 1] within their range;
        conditionals carry an extra active-indicator bit and encode as the
        0.5 sentinel while inactive.
        """
        self.check(config)
        out: list[float] = []
        for p in self.parameters:
            active = p.condition is None or p.condition.holds(config)
            if p.kind == KIND_CATEGORICAL:
                block = [0.0] * len(p.choices)
                if active:
                    block[p.choices.index(config[p.name])] = 1.0
                out.extend(block)
            else:
                if p.condition is not None:
                    out.append(1.0 if active else 0.0)
                out.append(
                    self._scale(p, config[p.name]) if active else INACTIVE_SENTINEL
                )
        return np.asarray(out, dtype=np.float64)

    def decode(self, vector: np.ndarray) -> Configuration:
        """Inverse of :meth:`encode` for well-formed vectors."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.encoding_width,):
            raise SpaceError(
                f"expected vector of width {self.encoding_width}, got {vector.shape}"
            )
        config: Configuration = {}
        i = 0
        for p in self.parameters:
            if p.kind == KIND_CATEGORICAL:
                block = vector[i : i + len(p.choices)]
                i += len(p.choices)
                if block.max() > 0.0:
                    config[p.name] = p.choices[int(np.argmax(block))]
            else:
                if p.condition is not None:
                    active = vector[i] >= 0.5
                    i += 1
                else:
                    active = True
                value = vector[i]
                i += 1
                if active:
                    config[p.name] = self._unscale(p, float(value))
        return config

    def _scale(self, p: ParameterSpec, value: float) -> float:
        low, high = p.bounds
        return (math.log(value) - math.log(low)) / (math.log(high) - math.log(low))

    def _unscale(self, p: ParameterSpec, t: float) -> float:
        low, high = p.bounds
        return float(math.exp(math.log(low) + t * (math.log(high) - math.log(low))))


def config_key(config: Configuration) -> str:
    """Short stable identifier for one configuration."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def active_learning_rate(config: Configuration) -> float | None:
    """The single active learning-rate value of a configuration, if any."""
    for name, value in config.items():
        if name.startswith("lr") and isinstance(value, (int, float)):
            return float(value)
    return None


# -- space definitions ------------------------------------------------------


def space_from_dict(doc: dict) -> SearchSpace:
    try:
        name = doc["name"]
        raw_params = doc["parameters"]
    except (KeyError, TypeError) as exc:
        raise SpaceError(f"space document missing field: {exc}") from exc
    params = []
    for raw in raw_params:
        try:
            kind = raw["kind"]
            pname = raw["name"]
        except (KeyError, TypeError) as exc:
            raise SpaceError(f"parameter entry missing field: {exc}") from exc
        condition = None
        if raw.get("condition") is not None:
            cond = raw["condition"]
            equals = cond.get("equals")
            if isinstance(equals, str):
                equals = (equals,)
            elif isinstance(equals, (list, tuple)):
                equals = tuple(equals)
            else:
                raise SpaceError(f"parameter {pname!r}: condition needs 'equals'")
            if "parent" not in cond:
                raise SpaceError(f"parameter {pname!r}: condition needs 'parent'")
            condition = Condition(parent=cond["parent"], equals=equals)
        if kind == KIND_CATEGORICAL:
            spec = ParameterSpec(
                name=pname, kind=kind,
                choices=tuple(raw.get("choices", ())), condition=condition,
            )
        elif kind == KIND_LOG_RANGE:
            bounds = raw.get("bounds")
            if not (isinstance(bounds, (list, tuple)) and len(bounds) == 2):
                raise SpaceError(f"parameter {pname!r}: bounds must be [low, high]")
            spec = ParameterSpec(
                name=pname, kind=kind,
                bounds=(float(bounds[0]), float(bounds[1])), condition=condition,
            )
        else:
            raise SpaceError(f"parameter {pname!r}: unknown kind {kind!r}")
        params.append(spec)
    return SearchSpace(name, params)


def load_space(path: str | Path) -> SearchSpace:
    """Load a space from a JSON file (see space_from_dict for the schema)."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpaceError(f"space file {path}: invalid JSON ({exc})") from exc
    return space_from_dict(doc)


def _dpn_fair_v1() -> SearchSpace:
    return SearchSpace(
        "dpn_fair_v1",
        [
            ParameterSpec("head", KIND_CATEGORICAL,
                          choices=("MagFace", "ArcFace", "CosFace")),
            ParameterSpec("optimizer", KIND_CATEGORICAL,
                          choices=("Adam", "AdamW", "SGD")),
            # One learning-rate branch per optimizer family; exactly one is
            # active for any configuration.
            ParameterSpec("lr_adam", KIND_LOG_RANGE, bounds=(1e-4, 1e-2),
                          condition=Condition("optimizer", ("Adam", "AdamW"))),
            ParameterSpec("lr_sgd", KIND_LOG_RANGE, bounds=(0.09, 0.8),
                          condition=Condition("optimizer", ("SGD",))),
            ParameterSpec("op1", KIND_CATEGORICAL, choices=BLOCK_OPS),
            ParameterSpec("op2", KIND_CATEGORICAL, choices=BLOCK_OPS),
            ParameterSpec("op3", KIND_CATEGORICAL, choices=BLOCK_OPS),
        ],
    )


def _cont6() -> SearchSpace:
    # Six unconditional log-ranges; encodes to a dense vector in [0,1]^6,
    # which is what the synthetic built-in objectives consume.
    return SearchSpace(
        "cont6",
        [ParameterSpec(f"x{i}", KIND_LOG_RANGE, bounds=(1e-3, 1.0))
         for i in range(1, 7)],
    )


PRESET_SPACES = {
    "dpn_fair_v1": _dpn_fair_v1,
    "cont6": _cont6,
}


def get_space(name_or_path: str) -> SearchSpace:
    """Resolve a preset space by name, or load a space file by path."""
    if name_or_path in PRESET_SPACES:
        return PRESET_SPACES[name_or_path]()
    path = Path(name_or_path)
    if path.exists():
        return load_space(path)
    raise SpaceError(
        f"unknown space {name_or_path!r}: not a preset "
        f"({', '.join(sorted(PRESET_SPACES))}) and no such file"
    )
