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
This module contains the memory samplers: objects that own an episodic memory and
decide, for every arriving stream example, whether and whom it replaces.

Samplers are discovered through the ``robust_replay.samplers`` entry-point group, so
third-party packages can register their own subclasses of :class:`MemorySampler`.
"""
# pylint: disable=attribute-defined-outside-init
import abc
from importlib import metadata

import numpy as np

from ._version import __version__
from .exceptions import ConfigError
from .memory import (
    BalancingCoefficient,
    EpisodicMemory,
    greedy_balanced_update,
    puridiver_update,
    reservoir_update,
)

ENTRY_POINT_GROUP = "robust_replay.samplers"


class MemorySampler(abc.ABC):
    r"""Abstract memory sampler.

    Args:
        capacity (int): memory size K
        rng (numpy.random.Generator or int or None): random generator, or a seed for one

    Keyword Args:
        Sampler-specific options; unknown options raise :class:`~.ConfigError`.
    """
    name = "Abstract memory sampler"
    short_name = None
    version = __version__

    _capabilities = {
        "uses_model": False,
        "uses_alpha": False,
    }
    _options = frozenset()
    """frozenset[str]: keyword arguments accepted by the sampler"""

    def __init__(self, capacity, rng=None, **kwargs):
        self.capacity = capacity
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.process_kwargs(kwargs)
        self.reset()

    @classmethod
    def capabilities(cls):
        """dict: what the sampler reads from the learner"""
        return dict(cls._capabilities)

    def process_kwargs(self, kwargs):
        """Validate the sampler options.

        Args:
            kwargs (dict): keyword arguments given upon construction
        """
        unknown = set(kwargs) - set(self._options)
        if unknown:
            raise ConfigError(
                f"Sampler '{self.short_name}' does not accept the option(s) {sorted(unknown)}."
            )

    def reset(self):
        """Empty the memory and the stream counters."""
        self.memory = EpisodicMemory(self.capacity)
        self.n_seen = 0
        self.n_replaced = 0

    def begin_batch(self, batch_mean_loss):
        """Hook called once per incoming mini-batch, after the learner's update."""

    def observe(self, candidate, model=None):
        """Offer one stream example to the memory.

        Args:
            candidate (Example): the arriving example
            model (Model or None): the live model, required by model-aware samplers

        Returns:
            bool: whether the candidate was stored
        """
        if self._capabilities["uses_model"] and model is None:
            raise ConfigError(f"Sampler '{self.short_name}' needs the live model.")

        self.n_seen += 1
        was_full = self.memory.is_full
        self.update(candidate, model)
        stored = candidate.id in self.memory
        if was_full and stored:
            self.n_replaced += 1
        return stored

    @abc.abstractmethod
    def update(self, candidate, model):
        """Apply the sampler's rule to one candidate."""

    def __repr__(self):
        return f"<{type(self).__name__} capacity={self.capacity} stored={len(self.memory)}>"


class ReservoirSampler(MemorySampler):
    """Reservoir sampling: a uniform sample of the stream seen so far."""

    name = "Reservoir sampler"
    short_name = "reservoir"

    def update(self, candidate, model):
        reservoir_update(self.memory, candidate, self.n_seen, self.rng)


class GreedyBalancedSampler(MemorySampler):
    """Greedy class balancing over noisy labels."""

    name = "Greedy balanced sampler"
    short_name = "gbs"

    def update(self, candidate, model):
        greedy_balanced_update(self.memory, candidate, self.rng)


class PuriDivERSampler(MemorySampler):
    r"""Purity- and diversity-aware sampling.

    Keyword Args:
        alpha_mode (str or BalancingCoefficient): ``"adaptive"`` (default) or ``"fixed:<value>"``
    """

    name = "Purity and diversity aware sampler"
    short_name = "puridiver"

    _capabilities = {
        "uses_model": True,
        "uses_alpha": True,
    }
    _options = frozenset({"alpha_mode"})

    def process_kwargs(self, kwargs):
        super().process_kwargs(kwargs)
        alpha_mode = kwargs.get("alpha_mode", "adaptive")
        if not isinstance(alpha_mode, BalancingCoefficient):
            alpha_mode = BalancingCoefficient.parse(alpha_mode)
        self.coefficient = alpha_mode

    def reset(self):
        super().reset()
        self.alpha = self.coefficient(0.0)
        self.alpha_history = []

    def begin_batch(self, batch_mean_loss):
        self.alpha = self.coefficient(batch_mean_loss)
        self.alpha_history.append(self.alpha)

    def update(self, candidate, model):
        puridiver_update(self.memory, candidate, model, self.alpha)


BUILTIN_SAMPLERS = {
    cls.short_name: cls for cls in (ReservoirSampler, GreedyBalancedSampler, PuriDivERSampler)
}


def _entry_points():
    eps = metadata.entry_points()
    if hasattr(eps, "select"):
        return {ep.name: ep for ep in eps.select(group=ENTRY_POINT_GROUP)}
    return {ep.name: ep for ep in eps.get(ENTRY_POINT_GROUP, [])}


def available_samplers():
    """list[str]: names of the installed samplers"""
    return sorted(set(BUILTIN_SAMPLERS) | set(_entry_points()))


def load_sampler(name, capacity, rng=None, **kwargs):
    """Construct a sampler by its short name.

    Registered entry points take precedence; the built-in samplers are always available.

    Args:
        name (str): sampler short name, e.g. ``"puridiver"``
        capacity (int): memory size
        rng (numpy.random.Generator or int or None): random generator or seed

    Returns:
        MemorySampler: the sampler
    """
    eps = _entry_points()
    if name in eps:
        cls = eps[name].load()
    elif name in BUILTIN_SAMPLERS:
        cls = BUILTIN_SAMPLERS[name]
    else:
        raise ConfigError(
            f"Sampler '{name}' does not exist. Available samplers are:\n {available_samplers()}"
        )
    return cls(capacity, rng=rng, **kwargs)
