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
This module contains the evaluation metrics and the metrics table.

* **purity**: the fraction of memory entries whose given label is correct;
* **diversity**: the mean, over true classes with at least two members, of the mean
  pairwise distance between the members' representations under a jointly trained model;
* **accuracy**: the fraction of test examples whose argmax prediction is correct.
"""
import csv
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
from scipy.spatial.distance import pdist

from .exceptions import InputError
from .nnkit import forward_batch

METRICS_HEADER = (
    "run_id",
    "task",
    "sampler",
    "robust_mode",
    "noise_type",
    "noise_ratio",
    "alpha_mode",
    "accuracy",
    "purity",
    "diversity",
    "alpha_mean",
    "seed",
)


def _now():
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class RunRecord:
    """The metrics of one run after one task."""

    run_id: str
    task_id: int
    sampler: str
    robust_mode: str
    noise_type: str
    noise_ratio: float
    alpha_mode: str
    last_accuracy: float
    memory_purity: float
    memory_diversity: float
    alpha_mean: float
    seed: int
    timestamp: str = field(default_factory=_now, compare=False)

    def __post_init__(self):
        for name in ("last_accuracy", "memory_purity", "memory_diversity", "alpha_mean"):
            if not np.isfinite(getattr(self, name)):
                raise InputError(f"RunRecord.{name} must be finite.")
        for name in ("last_accuracy", "memory_purity"):
            if not 0 <= getattr(self, name) <= 1:
                raise InputError(f"RunRecord.{name} must lie in [0, 1].")

    def to_row(self):
        """The CSV row, in :data:`METRICS_HEADER` order; floats are written with ``repr``."""
        return [
            self.run_id,
            str(self.task_id),
            self.sampler,
            self.robust_mode,
            self.noise_type,
            repr(float(self.noise_ratio)),
            self.alpha_mode,
            repr(float(self.last_accuracy)),
            repr(float(self.memory_purity)),
            repr(float(self.memory_diversity)),
            repr(float(self.alpha_mean)),
            str(self.seed),
        ]

    @classmethod
    def from_row(cls, row):
        """Parse a row dictionary produced by :func:`read_metrics_csv`."""
        return cls(
            run_id=row["run_id"],
            task_id=int(row["task"]),
            sampler=row["sampler"],
            robust_mode=row["robust_mode"],
            noise_type=row["noise_type"],
            noise_ratio=float(row["noise_ratio"]),
            alpha_mode=row["alpha_mode"],
            last_accuracy=float(row["accuracy"]),
            memory_purity=float(row["purity"]),
            memory_diversity=float(row["diversity"]),
            alpha_mean=float(row["alpha_mean"]),
            seed=int(row["seed"]),
        )


def memory_purity(memory):
    """Fraction of stored examples whose noisy label equals the true label."""
    examples = list(memory)
    if not examples:
        raise InputError("The purity of an empty memory is undefined.")
    return sum(1 for ex in examples if ex.is_clean) / len(examples)


def memory_diversity(memory, oracle_model):
    """Mean per-class pairwise representation distance under ``oracle_model``.

    Examples are grouped by true label; classes with fewer than two members are
    skipped.

    Returns:
        float: the diversity, ``0.0`` (with a warning) if no class has two members
    """
    groups = defaultdict(list)
    for ex in memory:
        groups[ex.true_label].append(ex.x)

    terms = []
    for label in sorted(groups):
        if len(groups[label]) < 2:
            continue
        reps = forward_batch(oracle_model, np.array(groups[label])).representation
        terms.append(float(np.mean(pdist(reps))))

    if not terms:
        warnings.warn("No class holds two memory examples; diversity is reported as 0.", UserWarning)
        return 0.0
    return float(np.mean(terms))


def evaluate_accuracy(model, test_set):
    """Fraction of test examples whose argmax prediction equals the true label.

    Ties in the prediction go to the lowest class index.
    """
    test_set = list(test_set)
    if not test_set:
        raise InputError("Cannot evaluate accuracy on an empty test set.")

    probs = forward_batch(model, np.array([ex.x for ex in test_set])).probs
    predictions = np.argmax(probs, axis=1)
    labels = np.array([ex.true_label for ex in test_set])
    return float(np.mean(predictions == labels))


def _record_key(record):
    return (record.seed, record.run_id, record.task_id)


def write_metrics_csv(records, path):
    """Write records to ``path``, sorted by seed, run and task."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for record in sorted(records, key=_record_key):
            writer.writerow(record.to_row())


def read_metrics_csv(path):
    """list[RunRecord]: records read back from a metrics table"""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != METRICS_HEADER:
            raise InputError(f"{path}: unexpected metrics header {reader.fieldnames}.")
        return [RunRecord.from_row(row) for row in reader]


def summarize(records, by=("sampler", "robust_mode", "alpha_mode", "noise_ratio")):
    """Seed-mean purity, diversity and accuracy per setting, using each run's last task.

    Args:
        records (Iterable[RunRecord]): records of one or more runs
        by (Sequence[str]): record fields identifying a setting

    Returns:
        list[dict]: one row per setting with the ``by`` fields, ``seeds``,
        ``accuracy``, ``purity`` and ``diversity``
    """
    last = {}
    for record in records:
        key = (record.run_id, record.seed)
        if key not in last or record.task_id > last[key].task_id:
            last[key] = record

    groups = defaultdict(list)
    for record in last.values():
        groups[tuple(getattr(record, name) for name in by)].append(record)

    rows = []
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        group = groups[key]
        row = dict(zip(by, key))
        row["seeds"] = len(group)
        row["accuracy"] = float(np.mean([r.last_accuracy for r in group]))
        row["purity"] = float(np.mean([r.memory_purity for r in group]))
        row["diversity"] = float(np.mean([r.memory_diversity for r in group]))
        rows.append(row)
    return rows
