"""Experiment configuration.

Configuration files are flat TOML documents: one ``key = value`` per line,
no tables.  Keys are the field names of :class:`ExperimentConfig`; unknown
keys are rejected.  ``lr_period = 0`` selects a constant learning rate.
Example::

    task = "memorize"
    num_inputs = 16
    num_hidden = 8
    num_visible = 16
    horizon = 40
    rule = "gem"
    num_samples = 10
    presentations = 100
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .filters import raised_cosine_bank
from .learners import RULES, LearnerConfig
from .network import Network, Topology

TASKS = ("memorize", "classify")

# Values that differ between the two protocols when left unset.
TASK_DEFAULTS = {
    "memorize": {"learning_rate": 5e-4, "lr_period": 40, "gamma": 0.9, "eval_every": 1},
    "classify": {"learning_rate": 1e-4, "lr_period": 0, "gamma": 0.2, "eval_every": 25},
}


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "memorize"
    # topology
    num_inputs: int = 8
    num_hidden: int = 0
    num_visible: int = 8
    recurrent_hidden: bool = False
    # filters
    synaptic_basis: int = 2
    synaptic_duration: int = 10
    somatic_basis: int = 1
    somatic_duration: int = 10
    # learning
    rule: str = "gem"
    num_samples: int = 1
    num_votes: int = 1
    learning_rate: Optional[float] = None
    lr_decay: float = 1.2
    lr_period: Optional[int] = None
    gamma: Optional[float] = None
    kappa_b: float = 0.9
    baseline: bool = True
    init_scale: float = 0.1
    # schedule
    presentations: int = 50
    epochs: int = 1
    eval_every: Optional[int] = None
    realizations: int = 20
    shuffle: bool = False
    # seeds
    seed: int = 0
    eval_seed: int = 12345
    data_seed: int = 0
    # data: files, or a synthetic stand-in when no files are given
    data: Optional[str] = None
    manifest: Optional[str] = None
    test_manifest: Optional[str] = None
    horizon: int = 40
    rate: float = 0.3
    num_classes: int = 3
    num_train: int = 60
    num_test: int = 30
    flip: float = 0.1
    # set on load so relative data paths resolve against the file
    base_dir: str = field(default=".", repr=False)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        for key, value in TASK_DEFAULTS[self.task].items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, value)
        if self.rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}, got {self.rule!r}")
        positive = ("num_inputs", "num_visible", "synaptic_basis", "somatic_basis",
                    "num_samples", "num_votes", "presentations", "epochs", "eval_every",
                    "realizations", "horizon", "num_classes", "num_train", "num_test")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.num_hidden < 0:
            raise ConfigError(f"num_hidden must be >= 0, got {self.num_hidden}")
        if self.lr_period < 0:
            raise ConfigError(f"lr_period must be >= 0, got {self.lr_period}")
        if self.task == "classify" and self.data is not None:
            raise ConfigError("classify reads labelled data from 'manifest', not 'data'")
        if self.task == "memorize" and self.manifest is not None:
            raise ConfigError("memorize reads one raster from 'data', not 'manifest'")
        if self.task == "classify" and self.manifest is None and \
                self.num_visible != self.num_classes:
            raise ConfigError("classify needs num_visible == num_classes")
        if not 0.0 <= self.rate <= 1.0 or not 0.0 <= self.flip <= 1.0:
            raise ConfigError("rate and flip must lie in [0, 1]")
        try:
            self.learner_config()
            self.network()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def learner_config(self) -> LearnerConfig:
        return LearnerConfig(
            rule=self.rule, num_samples=self.num_samples, learning_rate=self.learning_rate,
            gamma=self.gamma, kappa_b=self.kappa_b, lr_decay=self.lr_decay,
            lr_period=self.lr_period or None, baseline=self.baseline)

    def network(self) -> Network:
        top = Topology.default(self.num_inputs, self.num_hidden, self.num_visible,
                               self.recurrent_hidden)
        return Network(top, raised_cosine_bank(self.synaptic_basis, self.synaptic_duration),
                       raised_cosine_bank(self.somatic_basis, self.somatic_duration))

    def resolve(self, path: Optional[str]) -> Optional[Path]:
        if path is None:
            return None
        return Path(self.base_dir) / path

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in fields(ExperimentConfig) if f.name != "base_dir"}


def _check_types(values: dict[str, Any]) -> None:
    for key, value in values.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, dict):
            raise ConfigError(f"config must be flat, {key!r} is a table")
        expected = str(_FIELDS[key].type)
        if "bool" in expected and not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false")
        if "int" in expected and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"{key} must be an integer")
        if "float" in expected and (isinstance(value, bool)
                                    or not isinstance(value, (int, float))):
            raise ConfigError(f"{key} must be a number")
        if "str" in expected and not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")


def make_config(values: Optional[dict[str, Any]] = None,
                base_dir: Union[str, Path] = ".") -> ExperimentConfig:
    values = dict(values or {})
    _check_types(values)
    for key in [k for k, f in _FIELDS.items() if "float" in str(f.type)]:
        if key in values:
            values[key] = float(values[key])
    return ExperimentConfig(**values, base_dir=str(base_dir))


def load_config(path: Union[str, Path], overrides: Optional[dict[str, Any]] = None
                ) -> ExperimentConfig:
    """Read a flat TOML file; ``overrides`` take precedence over file values."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            values = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    values.update(overrides or {})
    return make_config(values, base_dir=path.parent)
