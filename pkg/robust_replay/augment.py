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
"""
Feature-space augmentations for the consistency loss.

The weak view adds small Gaussian jitter. The strong view zeroes a random subset of
features and then adds larger jitter. Noise scales are relative to the per-feature
standard deviation of the training data.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError


@dataclass(frozen=True)
class FeatureAugmenter:
    """Weak and strong feature perturbations.

    Args:
        feature_std (float or array[float]): scale of the features
        weak_sigma (float): relative jitter of the weak view
        strong_drop (float): probability of zeroing a feature in the strong view
        strong_sigma (float): relative jitter of the strong view
    """

    feature_std: object = 1.0
    weak_sigma: float = 0.05
    strong_drop: float = 0.2
    strong_sigma: float = 0.15

    def __post_init__(self):
        if self.weak_sigma < 0 or self.strong_sigma < 0:
            raise ConfigError("Augmentation noise scales must be non-negative.")
        if not 0 <= self.strong_drop < 1:
            raise ConfigError(f"strong_drop must lie in [0, 1), got {self.strong_drop}.")
        object.__setattr__(self, "feature_std", np.asarray(self.feature_std, dtype=float))

    def weak(self, x, rng):
        """A weakly perturbed copy of ``x``."""
        x = np.array(x, dtype=float)
        if self.weak_sigma == 0:
            return x
        return x + self.weak_sigma * self.feature_std * rng.standard_normal(x.shape)

    def strong(self, x, rng):
        """A strongly perturbed copy of ``x``."""
        x = np.array(x, dtype=float)
        if self.strong_drop > 0:
            x = np.where(rng.random(x.shape) < self.strong_drop, 0.0, x)
        if self.strong_sigma > 0:
            x = x + self.strong_sigma * self.feature_std * rng.standard_normal(x.shape)
        return x


def feature_std(dataset):
    """Per-feature standard deviation of a dataset; constant features get scale 1."""
    X = np.array([ex.x for ex in dataset], dtype=float)
    if X.size == 0:
        return 1.0
    std = X.std(axis=0)
    return np.where(std > 0, std, 1.0)


DEFAULT_AUGMENTER = FeatureAugmenter()


def weak_aug(x, rng):
    """Weak view of ``x`` under the default settings, with unit feature scale.

    Replay builds its own :class:`FeatureAugmenter` from :func:`feature_std` of the
    clean training set instead; this helper suits inputs already standardised.
    """
    return DEFAULT_AUGMENTER.weak(x, rng)


def strong_aug(x, rng):
    """Strong view of ``x`` under the default settings, with unit feature scale."""
    return DEFAULT_AUGMENTER.strong(x, rng)
