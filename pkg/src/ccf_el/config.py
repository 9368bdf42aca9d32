"""Study configuration.

A :class:`StudyConfig` is built from an optional YAML file (keys are the long option names with ``_``) and the
command line, which takes precedence. The config hash identifies the results an output directory holds.
"""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import yaml

from .errors import ConfigError
from .models import MONTHLY, Model, ModelSpec

_logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "estimate", "test", "mc-study", "case-study")
ESTIMATORS = ("el", "mle", "amle")
AUTO = "auto"
UNHASHED = ("force", "threads")

Bandwidths = Union[str, Tuple[float, ...]]


def parse_theta(text: Optional[str]) -> Dict[str, float]:
    """``"kappa=0.8,alpha=0.09"`` to a dict"""
    if not text:
        return {}
    result = {}
    for item in text.split(","):
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise ConfigError(f"Invalid --theta item '{item}', expected name=value")
        try:
            result[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"Invalid value for {name.strip()} in --theta: '{value}'")
    return result


def parse_bandwidths(value) -> Bandwidths:
    if value is None or value == AUTO:
        return AUTO
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    try:
        result = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"Invalid bandwidth list {value!r}")
    if not result or any(h <= 0 for h in result):
        raise ConfigError(f"Bandwidths must be positive, got {result}")
    return result


@dataclass(frozen=True)
class StudyConfig:
    command: str
    model: Optional[str] = None
    null_model: Optional[str] = None
    theta: Dict[str, float] = field(default_factory=dict)
    n: int = 500
    delta: float = MONTHLY
    reps: int = 100
    bootstrap: int = 99
    alpha: float = 0.05
    bandwidths: Bandwidths = AUTO
    seed: Optional[int] = None
    input: Optional[str] = None
    out: Optional[str] = None
    estimator: str = "el"
    baseline: bool = False
    force: bool = False
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "bandwidths", parse_bandwidths(self.bandwidths))
        object.__setattr__(self, "theta", dict(self.theta or {}))

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}")
        return cls(**values)

    @classmethod
    def load(cls, command: str, config_file: Optional[str] = None, **overrides) -> "StudyConfig":
        """YAML file values overridden by every non ``None`` keyword"""
        values: Dict[str, Any] = {}
        if config_file:
            if not os.path.exists(config_file):
                raise ConfigError(f"Config file {config_file} not found")
            with open(config_file) as f:
                loaded = yaml.load(f, yaml.SafeLoader) or {}
            if not isinstance(loaded, dict):
                raise ConfigError(f"Config file {config_file} must hold a mapping")
            values.update({k.replace("-", "_"): v for k, v in loaded.items()})
        values.update({k: v for k, v in overrides.items() if v is not None})
        values["command"] = command
        if isinstance(values.get("theta"), str):
            values["theta"] = parse_theta(values["theta"])
        config = cls.from_mapping(values)
        config.validate()
        return config

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"Unknown command {self.command}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"Unknown estimator {self.estimator}, expected one of {ESTIMATORS}")
        if self.n < 2 or self.reps < 1:
            raise ConfigError(f"n must be at least 2 and reps at least 1 (n={self.n}, reps={self.reps})")
        if not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.threads < 1 and self.threads != -1:
            raise ConfigError(f"threads must be positive or -1, got {self.threads}")
        for kind in (self.model, self.null_model):
            if kind is not None:
                Model.lookup(kind)
        if self.command in ("simulate", "mc-study") and self.model is None:
            raise ConfigError(f"{self.command} needs --model")
        if self.command in ("estimate", "test") and self.model is None and self.null_model is None:
            raise ConfigError(f"{self.command} needs --model")
        if self.command == "mc-study" and self.seed is None:
            raise ConfigError("mc-study needs an explicit --seed")
        if self.command in ("estimate", "test") and self.input is None:
            raise ConfigError(f"{self.command} needs --in")
        if self.input is not None and not os.path.exists(self.input):
            raise ConfigError(f"Input file {self.input} not found")
        if self.estimator != "el" and self.command in ("mc-study", "test"):
            raise ConfigError(f"{self.command} always fits EL, --estimator applies to estimate only")
        if self.estimator != "el" and self.command == "estimate":
            self.likelihood_kind()
        if self.theta and self.model is not None:
            self.model_spec().build()

    def likelihood_kind(self) -> str:
        """Model kind for a likelihood estimator, checking the estimator fits the model"""
        kind = Model.lookup(self.target_model).kind
        if kind == "IG_OU":
            raise ConfigError("No likelihood is available for IG_OU, use --estimator el")
        if (self.estimator == "amle") != (kind == "VSK_MJ"):
            expected = "amle" if kind == "VSK_MJ" else "mle"
            raise ConfigError(f"Estimator {self.estimator} does not apply to {kind}, use {expected}")
        return kind

    @property
    def target_model(self) -> str:
        """Model fitted or tested by ``estimate``/``test``"""
        return self.null_model or self.model

    def model_spec(self) -> ModelSpec:
        return ModelSpec.from_params(self.model, self.theta, self.delta)

    def explicit_bandwidths(self) -> Optional[Tuple[float, ...]]:
        return None if self.bandwidths == AUTO else self.bandwidths

    def with_overrides(self, **changes) -> "StudyConfig":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        values = asdict(self)
        values["bandwidths"] = AUTO if self.bandwidths == AUTO else list(self.bandwidths)
        return values

    def config_hash(self) -> str:
        values = {k: v for k, v in self.to_dict().items() if k not in UNHASHED}
        canonical = json.dumps(values, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
