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
This module contains the data stream: labelled examples, label-noise injection and the
construction of blurry task streams.

A blurry stream with ratio :math:`L` assigns every class to exactly one task as a
*major* class. Each task additionally receives a share :math:`L` of its examples from
the classes that are major elsewhere (its *minor* classes).
"""
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigError, InputError

MAX_DEMAND_ROUNDS = 20
"""int: rounds of re-solving the minor demands of a blurry split"""


@dataclass(frozen=True, eq=False)
class Example:
    """A labelled example flowing through the stream, the memory and training.

    Args:
        id (int): identifier, unique within a dataset
        x (array[float]): feature vector
        noisy_label (int): the observed, possibly corrupted label
        true_label (int): the ground-truth label; hidden from learners and only read by
            metrics and noise injection
    """

    id: int
    x: np.ndarray
    noisy_label: int
    true_label: int

    @property
    def is_clean(self):
        """bool: whether the observed label equals the ground truth"""
        return self.noisy_label == self.true_label

    def with_label(self, label):
        """Return a copy of the example carrying ``label`` as its noisy label."""
        return replace(self, noisy_label=int(label))


@dataclass(frozen=True)
class TaskStream:
    """The examples of one task, in stream order."""

    task_id: int
    examples: tuple
    major_classes: frozenset
    minor_classes: frozenset = field(default_factory=frozenset)

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def class_counts(self, true_labels=True):
        """Count examples per class, keyed by true (default) or noisy label."""
        attr = "true_label" if true_labels else "noisy_label"
        return Counter(getattr(ex, attr) for ex in self.examples)

    def minor_fraction(self):
        """float: fraction of examples whose true class is a minor class of this task"""
        if not self.examples:
            return 0.0
        minor = sum(1 for ex in self.examples if ex.true_label in self.minor_classes)
        return minor / len(self.examples)


def _num_classes(dataset, num_classes):
    if num_classes is not None:
        return num_classes
    return max(ex.true_label for ex in dataset) + 1


def _check_ratio(ratio):
    if not 0 <= ratio < 1:
        raise ConfigError(f"The noise ratio must lie in [0, 1), got {ratio}.")


def inject_symmetric_noise(dataset, ratio, seed=None, num_classes=None):
    """Flip each label, with probability ``ratio``, to a uniformly chosen different class.

    Args:
        dataset (Sequence[Example]): the clean dataset
        ratio (float): flip probability in ``[0, 1)``
        seed (int or None): random seed
        num_classes (int or None): number of classes; inferred from the true labels if omitted

    Returns:
        list[Example]: the dataset with corrupted noisy labels; features and true labels
        are untouched
    """
    _check_ratio(ratio)
    dataset = list(dataset)
    if not dataset:
        return []

    C = _num_classes(dataset, num_classes)
    if C < 2 and ratio > 0:
        raise ConfigError("Symmetric noise needs at least two classes.")

    rng = np.random.default_rng(seed)
    flips = rng.random(len(dataset)) < ratio
    # an offset in [1, C) never maps a label onto itself
    offsets = rng.integers(1, max(C, 2), size=len(dataset))

    noisy = []
    for ex, flip, offset in zip(dataset, flips, offsets):
        label = (ex.true_label + offset) % C if flip else ex.true_label
        noisy.append(ex.with_label(label))
    return noisy


def circular_class_map(num_classes):
    """The default asymmetric map ``c -> (c + 1) mod C``."""
    return {c: (c + 1) % num_classes for c in range(num_classes)}


def inject_asymmetric_noise(dataset, ratio, class_map=None, seed=None, num_classes=None):
    """Flip each label, with probability ``ratio``, to its image under ``class_map``.

    Args:
        dataset (Sequence[Example]): the clean dataset
        ratio (float): flip probability in ``[0, 1)``
        class_map (dict[int, int] or None): target class for each mapped class; classes
            absent from the map are never flipped. Defaults to :func:`circular_class_map`.
        seed (int or None): random seed
        num_classes (int or None): number of classes for the default map

    Returns:
        list[Example]: the dataset with corrupted noisy labels
    """
    _check_ratio(ratio)
    dataset = list(dataset)
    if not dataset:
        return []

    if class_map is None:
        class_map = circular_class_map(_num_classes(dataset, num_classes))
    for source, target in class_map.items():
        if source == target:
            raise ConfigError(f"The asymmetric noise map sends class {source} to itself.")

    rng = np.random.default_rng(seed)
    flips = rng.random(len(dataset)) < ratio

    noisy = []
    for ex, flip in zip(dataset, flips):
        if flip and ex.true_label in class_map:
            noisy.append(ex.with_label(class_map[ex.true_label]))
        else:
            noisy.append(ex.with_label(ex.true_label))
    return noisy


def noise_rate(dataset):
    """float: observed fraction of examples whose noisy label differs from the true label"""
    dataset = list(dataset)
    if not dataset:
        return 0.0
    return sum(1 for ex in dataset if not ex.is_clean) / len(dataset)


def _assign_major_classes(classes, num_tasks, rng):
    """Shuffle the classes and deal them to tasks; the remainder goes to the last tasks."""
    perm = [int(c) for c in rng.permutation(classes)]
    per_task = len(perm) // num_tasks
    majors = [perm[t * per_task : (t + 1) * per_task] for t in range(num_tasks)]

    remainder = perm[num_tasks * per_task :]
    for i, c in enumerate(remainder):
        majors[num_tasks - 1 - (i % num_tasks)].append(c)
    return majors


def _minor_demands(majors, class_sizes, blurry_ratio):
    r"""Number of minor examples each task receives.

    Task :math:`t` receives :math:`r_t` minor examples, split evenly over its minor
    classes, and keeps what its major classes do not donate. Requiring
    :math:`r_t = L\,(\mathrm{kept}_t + r_t)` gives the linear system
    :math:`(I + \lambda B)\,r = \lambda A` with :math:`\lambda = L / (1 - L)`, where
    :math:`A_t` is the size of task :math:`t`'s major classes and
    :math:`B_{t t'}` is the share of task :math:`t'`'s demand drawn from task :math:`t`.
    """
    T = len(majors)
    C = len(class_sizes)
    lam = blurry_ratio / (1 - blurry_ratio)

    A = np.array([sum(class_sizes[c] for c in m) for m in majors], dtype=float)
    B = np.zeros((T, T))
    for t_src in range(T):
        for t_dst in range(T):
            if t_src != t_dst:
                B[t_src, t_dst] = len(majors[t_src]) / (C - len(majors[t_dst]))

    demands = np.linalg.solve(np.eye(T) + lam * B, lam * A)
    return [int(round(r)) for r in demands]


def _fill_demand(demand, order, spare):
    """Spread ``demand`` over the classes in ``order`` as evenly as their ``spare`` allows."""
    take = dict.fromkeys(order, 0)
    left = demand
    open_classes = [c for c in order if spare[c] > 0]
    while left > 0 and open_classes:
        base, extra = divmod(left, len(open_classes))
        for i, c in enumerate(open_classes):
            give = min(base + (1 if i < extra else 0), spare[c] - take[c])
            take[c] += give
            left -= give
        open_classes = [c for c in open_classes if take[c] < spare[c]]
    return take, left


def _allocate_minors(demands, orders, class_sizes):
    """Minor examples drawn by each task from each class.

    A class keeps at least one example for its own major task.
    """
    spare = {c: n - 1 for c, n in class_sizes.items()}
    allocation = []
    for t, (demand, order) in enumerate(zip(demands, orders)):
        take, left = _fill_demand(demand, order, spare)
        if left > 0:
            raise ConfigError(
                f"The minor classes of task {t} are too small to provide {demand} minor examples; "
                "lower the blurry ratio."
            )
        for c, n in take.items():
            spare[c] -= n
        allocation.append(take)
    return allocation


def _balanced_allocation(majors, orders, class_sizes, blurry_ratio):
    """Allocate minor examples so that every task's minor share matches ``blurry_ratio``.

    Starts from the even-split demands and re-solves them against the donations that
    the capped allocation actually makes, until they agree.
    """
    lam = blurry_ratio / (1 - blurry_ratio)
    A = [sum(class_sizes[c] for c in m) for m in majors]
    demands = [max(d, 0) for d in _minor_demands(majors, class_sizes, blurry_ratio)]
    allocation = _allocate_minors(demands, orders, class_sizes)
    for _ in range(MAX_DEMAND_ROUNDS):
        donated = [sum(take.get(c, 0) for take in allocation for c in m) for m in majors]
        updated = [int(round(lam * (a - d))) for a, d in zip(A, donated)]
        if updated == demands:
            break
        demands = updated
        allocation = _allocate_minors(demands, orders, class_sizes)
    return allocation


def split_blurry_tasks(dataset, num_tasks, blurry_ratio, seed=None):
    """Split a dataset into blurry task streams.

    Classes are identified by their true labels. Every class is major in exactly one
    task, and each task draws a share ``blurry_ratio`` of its examples from its minor
    classes (all other classes), balanced across them. A minor class that runs short
    passes the rest of its share to the other minor classes of the task, and every class
    keeps at least one example for its own task. Every example appears in exactly one task.

    Args:
        dataset (Sequence[Example]): the (possibly noise-injected) training set
        num_tasks (int): number of tasks T
        blurry_ratio (float): minor-class share L in ``[0, 1)``; ignored when ``num_tasks == 1``
        seed (int or None): random seed

    Returns:
        list[TaskStream]: the tasks, each in a seeded shuffled order

    Raises:
        ConfigError: if ``num_tasks`` exceeds the number of classes, ``blurry_ratio``
            lies outside ``[0, 1)`` or the minor classes of some task cannot donate its share
    """
    dataset = list(dataset)
    if not 0 <= blurry_ratio < 1:
        raise ConfigError(f"The blurry ratio must lie in [0, 1), got {blurry_ratio}.")
    if num_tasks < 1:
        raise ConfigError("At least one task is required.")

    by_class = defaultdict(list)
    for ex in dataset:
        by_class[ex.true_label].append(ex)
    classes = sorted(by_class)

    if num_tasks > len(classes):
        raise ConfigError(
            f"Cannot split {len(classes)} classes into {num_tasks} tasks; "
            "every task needs at least one major class."
        )

    rng = np.random.default_rng(seed)
    majors = _assign_major_classes(classes, num_tasks, rng)
    pools = {c: [by_class[c][i] for i in rng.permutation(len(by_class[c]))] for c in classes}

    use_minors = num_tasks > 1 and blurry_ratio > 0
    task_examples = [[] for _ in range(num_tasks)]
    minor_sets = [frozenset() for _ in range(num_tasks)]

    if use_minors:
        orders = []
        for t in range(num_tasks):
            minors = [c for c in classes if c not in majors[t]]
            minor_sets[t] = frozenset(minors)
            orders.append([minors[i] for i in rng.permutation(len(minors))])

        class_sizes = {c: len(pools[c]) for c in classes}
        allocation = _balanced_allocation(majors, orders, class_sizes, blurry_ratio)
        for t, take in enumerate(allocation):
            for c in orders[t]:
                task_examples[t].extend(pools[c][: take[c]])
                pools[c] = pools[c][take[c] :]

    for t in range(num_tasks):
        for c in majors[t]:
            task_examples[t].extend(pools[c])

    tasks = []
    for t in range(num_tasks):
        examples = task_examples[t]
        examples = tuple(examples[i] for i in rng.permutation(len(examples)))
        tasks.append(TaskStream(t, examples, frozenset(majors[t]), minor_sets[t]))
    return tasks


def batches(task, batch_size):
    """Yield the examples of a task as consecutive mini-batches in stream order.

    The last batch may be shorter than ``batch_size``.
    """
    if batch_size < 1:
        raise InputError("The batch size must be at least 1.")

    examples = list(task)
    for start in range(0, len(examples), batch_size):
        yield examples[start : start + batch_size]


def stratified_split(dataset, test_fraction=0.2, seed=None):
    """Split a dataset into train and test parts, stratified by true label.

    Returns:
        tuple[list[Example], list[Example]]: the train and test parts, each ordered by id
    """
    if not 0 <= test_fraction < 1:
        raise ConfigError(f"The test fraction must lie in [0, 1), got {test_fraction}.")

    by_class = defaultdict(list)
    for ex in dataset:
        by_class[ex.true_label].append(ex)

    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in sorted(by_class):
        members = by_class[c]
        perm = rng.permutation(len(members))
        n_test = int(round(test_fraction * len(members)))
        test.extend(members[i] for i in perm[:n_test])
        train.extend(members[i] for i in perm[n_test:])

    return sorted(train, key=lambda ex: ex.id), sorted(test, key=lambda ex: ex.id)
