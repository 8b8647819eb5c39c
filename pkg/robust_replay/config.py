# Copyright 2026 The robust-replay Authors

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at

#     http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
r"""
This module contains the experiment configuration.

Configurations are flat TOML documents whose keys are the fields of
:class:`ExperimentConfig`, for example:

.. code-block:: toml

    dataset = "synthetic"
    num_tasks = 5
    blurry_ratio = 0.1
    noise_type = "sym"
    noise_ratio = 0.4
    memory_size = 200
    sampler = "puridiver"
    robust_mode = "full"
    alpha_mode = "adaptive"
    seeds = [0, 1, 2]
"""
# pylint: disable=too-many-instance-attributes
import numbers
from dataclasses import asdict, dataclass, field, fields, replace

import toml

from .exceptions import ConfigError
from .memory import BalancingCoefficient
from .robust import ROBUST_MODES

NOISE_TYPES = ("sym", "asym")
LR_SCHEDULES = ("constant", "cosine")
SAMPLERS = ("puridiver", "reservoir", "gbs")

_KINDS = {int: "an integer", float: "a number", str: "a string", tuple: "a list of integers"}


def _is_int(value):
    return isinstance(value, numbers.Integral) and not isinstance(value, bool)


def _matches(value, kind):
    if kind is int:
        return _is_int(value)
    if kind is float:
        return isinstance(value, numbers.Real) and not isinstance(value, bool)
    if kind is str:
        return isinstance(value, str)
    return isinstance(value, (list, tuple)) and all(_is_int(v) for v in value)


def check_types(obj, optional=()):
    """Raise :class:`~.ConfigError` naming the first field whose value has the wrong type.

    Booleans are not accepted as numbers. Fields listed in ``optional`` may be ``None``.
    """
    for f in fields(obj):
        value = getattr(obj, f.name)
        if value is None and f.name in optional:
            continue
        if not _matches(value, f.type):
            raise ConfigError(f"Invalid value for '{f.name}': {value!r} is not {_KINDS[f.type]}")


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian blobs: ``samples_per_class`` points around each of ``num_classes`` means.

    Class means are random directions scaled to ``radius``; points are drawn with
    standard deviation ``sigma`` around their mean.
    """

    num_classes: int = 10
    dim: int = 32
    samples_per_class: int = 500
    radius: float = 6.0
    sigma: float = 1.5
    test_fraction: float = 0.2

    def __post_init__(self):
        check_types(self)
        if self.samples_per_class < 2:
            raise ConfigError("samples_per_class must be at least 2.")
        if self.num_classes < 1 or self.dim < 1:
            raise ConfigError("num_classes and dim must be positive.")
        if self.radius < 0 or self.sigma < 0:
            raise ConfigError("radius and sigma must be non-negative.")
        if not 0 <= self.test_fraction < 1:
            raise ConfigError(f"test_fraction must lie in [0, 1), got {self.test_fraction}.")

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"Unknown synthetic dataset key(s): {sorted(unknown)}")
        return cls(**values)


@dataclass(frozen=True)
class ExperimentConfig:
    """A complete, validated experiment description.

    Defaults reproduce the canonical desk setup: 10 classes of 32-dimensional blobs,
    five blurry-10 tasks, 40% symmetric noise and a memory of 200 examples.
    """

    dataset: str = "synthetic"
    test_dataset: str = None
    num_classes: int = 10
    dim: int = 32
    samples_per_class: int = 500
    radius: float = 6.0
    sigma: float = 1.5
    num_tasks: int = 5
    blurry_ratio: float = 0.1
    noise_type: str = "sym"
    noise_ratio: float = 0.4
    asym_map: tuple = None
    memory_size: int = 200
    batch_size: int = 16
    sampler: str = "puridiver"
    robust_mode: str = "full"
    alpha_mode: str = "adaptive"
    eta: float = 1.0
    lr: float = 0.05
    lr_schedule: str = "constant"
    memory_epochs: int = 20
    warmup_epochs: int = 5
    hidden: int = 64
    oracle_epochs: int = 20
    weak_sigma: float = 0.05
    strong_drop: float = 0.2
    strong_sigma: float = 0.15
    seeds: tuple = field(default=(0, 1, 2))
    workers: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        check_types(self, optional=("test_dataset", "asym_map"))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.asym_map is not None:
            object.__setattr__(self, "asym_map", tuple(int(c) for c in self.asym_map))
        self.validate()

    def validate(self):
        """Check every field; raises :class:`~.ConfigError` naming the offending key."""
        checks = [
            ("num_classes", self.num_classes >= 2),
            ("dim", self.dim >= 1),
            ("num_tasks", 1 <= self.num_tasks <= self.num_classes),
            ("blurry_ratio", 0 <= self.blurry_ratio < 1),
            ("noise_type", self.noise_type in NOISE_TYPES),
            ("noise_ratio", 0 <= self.noise_ratio < 1),
            ("memory_size", self.memory_size >= 1),
            ("batch_size", self.batch_size >= 1),
            ("sampler", bool(self.sampler)),
            ("robust_mode", self.robust_mode in ROBUST_MODES),
            ("eta", self.eta >= 0),
            ("lr", self.lr > 0),
            ("lr_schedule", self.lr_schedule in LR_SCHEDULES),
            ("memory_epochs", self.memory_epochs >= 0),
            ("warmup_epochs", self.warmup_epochs >= 0),
            ("hidden", self.hidden >= 1),
            ("oracle_epochs", self.oracle_epochs >= 0),
            ("samples_per_class", self.samples_per_class >= 2),
            ("radius", self.radius >= 0),
            ("sigma", self.sigma >= 0),
            ("weak_sigma", self.weak_sigma >= 0),
            ("strong_drop", 0 <= self.strong_drop < 1),
            ("strong_sigma", self.strong_sigma >= 0),
            ("seeds", len(self.seeds) >= 1),
            ("workers", self.workers >= 1),
        ]
        for key, ok in checks:
            if not ok:
                raise ConfigError(f"Invalid value for '{key}': {getattr(self, key)!r}")

        try:
            BalancingCoefficient.parse(self.alpha_mode)
        except ConfigError as e:
            raise ConfigError(f"Invalid value for 'alpha_mode': {e}") from None

        if self.asym_map is not None:
            if len(self.asym_map) != self.num_classes:
                raise ConfigError("'asym_map' must list one target class per class.")
            for source, target in enumerate(self.asym_map):
                if target == source or not 0 <= target < self.num_classes:
                    raise ConfigError(f"Invalid value for 'asym_map': class {source} -> {target}")

    @property
    def coefficient(self):
        """BalancingCoefficient: the parsed ``alpha_mode``"""
        return BalancingCoefficient.parse(self.alpha_mode)

    @property
    def is_synthetic(self):
        return self.dataset == "synthetic"

    def synthetic_spec(self):
        """SyntheticSpec: the generator settings held by this configuration"""
        return SyntheticSpec(
            num_classes=self.num_classes,
            dim=self.dim,
            samples_per_class=self.samples_per_class,
            radius=self.radius,
            sigma=self.sigma,
        )

    def class_map(self):
        """dict[int, int] or None: the asymmetric noise map"""
        if self.asym_map is None:
            return None
        return dict(enumerate(self.asym_map))

    @classmethod
    def from_dict(cls, values):
        """Build a configuration from a flat mapping, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"Unknown configuration key(s): {sorted(unknown)}")
        try:
            return cls(**values)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid configuration: {e}") from None

    def to_dict(self):
        """dict: the configuration with ``None`` values left out"""
        values = asdict(self)
        for key in ("seeds", "asym_map"):
            if values[key] is not None:
                values[key] = list(values[key])
        return {k: v for k, v in values.items() if v is not None}

    def replace(self, **changes):
        """A validated copy with some fields changed."""
        known = {f.name for f in fields(self)}
        unknown = set(changes) - known
        if unknown:
            raise ConfigError(f"Unknown configuration key(s): {sorted(unknown)}")
        return replace(self, **changes)

    def dumps(self):
        """str: the configuration as TOML"""
        return toml.dumps(self.to_dict())


def load_config(path):
    """Read an :class:`ExperimentConfig` from a TOML file."""
    try:
        with open(path, encoding="utf-8") as f:
            values = toml.load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read configuration file {path}: {e}") from None
    except toml.TomlDecodeError as e:
        raise ConfigError(f"Malformed configuration file {path}: {e}") from None
    return ExperimentConfig.from_dict(values)


def load_synthetic_spec(path):
    """Read a :class:`SyntheticSpec` from a TOML file."""
    try:
        with open(path, encoding="utf-8") as f:
            values = toml.load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read dataset spec {path}: {e}") from None
    except toml.TomlDecodeError as e:
        raise ConfigError(f"Malformed dataset spec {path}: {e}") from None
    return SyntheticSpec.from_dict(values)
