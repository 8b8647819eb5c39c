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
Shared fixtures for the robust-replay tests.
"""
import os

import numpy as np
import pytest

from robust_replay.nnkit import Model, init_model
from robust_replay.stream import Example

np.random.seed(42)


def make_blobs(num_classes, per_class, dim=2, radius=5.0, sigma=0.3, seed=0):
    """Well separated Gaussian blobs as clean examples with consecutive ids."""
    rng = np.random.default_rng(seed)
    angles = 2 * np.pi * np.arange(num_classes) / num_classes
    examples = []
    for c in range(num_classes):
        mean = np.zeros(dim)
        mean[0], mean[1] = radius * np.cos(angles[c]), radius * np.sin(angles[c])
        for _ in range(per_class):
            x = mean + sigma * rng.standard_normal(dim)
            examples.append(Example(len(examples), x, c, c))
    return examples


def make_example(ex_id, label, x=None, true_label=None, dim=2):
    """A single example; the feature vector defaults to a unit vector seeded by the id."""
    if x is None:
        x = np.random.default_rng(ex_id).standard_normal(dim)
    return Example(ex_id, np.asarray(x, dtype=float), label, label if true_label is None else true_label)


@pytest.fixture
def acceptance():
    if os.getenv("ROBUST_REPLAY_ACCEPTANCE") is None:
        pytest.skip("Skipping acceptance experiment, set ROBUST_REPLAY_ACCEPTANCE to run it")
    yield


@pytest.fixture
def tol():
    return {"atol": 1e-8, "rtol": 0}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_model(rng):
    """A random model with D=4, H=6 and C=3."""
    return init_model(4, 6, 3, rng)


@pytest.fixture
def zero_model():
    """A model whose outputs are uniform for every input."""
    return Model(np.zeros((5, 2)), np.zeros(5), np.zeros((4, 5)), np.zeros(4))


@pytest.fixture
def blobs():
    """Two-dimensional blobs: 4 classes of 50 examples."""
    return make_blobs(4, 50)
