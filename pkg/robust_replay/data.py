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
Dataset synthesis and CSV ingestion.

The CSV schema is ``id,label,f0,...,f{D-1}`` with one example per row. Labels are
the clean ground truth; noise is injected by the harness.
"""
import csv
from typing import NamedTuple

import numpy as np

from .exceptions import InputError
from .stream import Example, stratified_split


class Dataset(NamedTuple):
    """Train and test examples."""

    train: list
    test: list


def generate_synthetic(spec, seed=None):
    """Gaussian blobs on a sphere of radius ``spec.radius``.

    Args:
        spec (SyntheticSpec): generator settings
        seed (int or numpy.random.SeedSequence or None): random seed

    Returns:
        Dataset: a stratified train/test split; ids are consecutive over the full set
    """
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((spec.num_classes, spec.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = spec.radius * directions

    examples = []
    for c in range(spec.num_classes):
        X = means[c] + spec.sigma * rng.standard_normal((spec.samples_per_class, spec.dim))
        for x in X:
            examples.append(Example(len(examples), x, c, c))

    train, test = stratified_split(examples, spec.test_fraction, seed=rng)
    return Dataset(train, test)


def write_dataset_csv(examples, path):
    """Write examples with 17 significant digits, so that reading them back is exact."""
    examples = list(examples)
    dim = len(examples[0].x) if examples else 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["id", "label"] + [f"f{i}" for i in range(dim)])
        for ex in examples:
            writer.writerow([ex.id, ex.true_label] + ["%.17g" % v for v in ex.x])


def load_dataset_csv(path):
    """Read examples written by :func:`write_dataset_csv`.

    Raises:
        InputError: for an empty file, a bad header, a malformed row or a duplicate id;
            the message names the offending line
    """
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))

    if not rows:
        raise InputError(f"{path}: the dataset file is empty.")

    header = rows[0]
    dim = len(header) - 2
    if dim < 1 or header != ["id", "label"] + [f"f{i}" for i in range(dim)]:
        raise InputError(f"{path}, line 1: expected a header 'id,label,f0,...', got {header}.")

    examples, seen = [], set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != dim + 2:
            raise InputError(f"{path}, line {lineno}: expected {dim + 2} fields, got {len(row)}.")
        try:
            ex_id, label = int(row[0]), int(row[1])
            x = np.array([float(v) for v in row[2:]])
        except ValueError as e:
            raise InputError(f"{path}, line {lineno}: {e}") from None

        if label < 0:
            raise InputError(f"{path}, line {lineno}: negative label {label}.")
        if not np.all(np.isfinite(x)):
            raise InputError(f"{path}, line {lineno}: non-finite feature value.")
        if ex_id in seen:
            raise InputError(f"{path}, line {lineno}: duplicate id {ex_id}.")

        seen.add(ex_id)
        examples.append(Example(ex_id, x, label, label))

    if not examples:
        raise InputError(f"{path}: the dataset file holds no examples.")
    return examples
