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
This module contains the episodic memory and its update rules.

The purity- and diversity-aware rule scores every candidate by

.. math::

    S(x, \tilde y) = (1 - \alpha)\,\ell(x, \tilde y)
        + \alpha\,\frac{1}{|M[\tilde y]|}\sum_{\hat x \in M[\tilde y]}
          \cos\big(f_{rel}(x; \tilde y), f_{rel}(\hat x; \tilde y)\big)

and drops the highest-scoring example whenever the memory overflows. Reservoir
sampling and greedy class balancing are provided as baselines.
"""
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, InputError, RunError
from .nnkit import cross_entropy, forward, forward_batch, one_hot


class EpisodicMemory:
    """A capacity-bounded, insertion-ordered set of examples indexed by noisy label.

    Args:
        capacity (int): the maximum number of examples K
    """

    def __init__(self, capacity):
        if capacity < 1:
            raise ConfigError(f"The memory capacity must be at least 1, got {capacity}.")
        self.capacity = int(capacity)
        self._entries = []  # (insertion index, example), oldest first
        self._by_label = {}  # noisy label -> {id: example}
        self._next_index = 0

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return (ex for _, ex in self._entries)

    def __contains__(self, example_id):
        return any(ex.id == example_id for _, ex in self._entries)

    @property
    def is_full(self):
        """bool: whether the memory holds ``capacity`` examples"""
        return len(self._entries) >= self.capacity

    @property
    def examples(self):
        """tuple[Example]: the stored examples, oldest first"""
        return tuple(ex for _, ex in self._entries)

    @property
    def insertion_indices(self):
        """tuple[int]: insertion index of every stored example, aligned with :attr:`examples`"""
        return tuple(idx for idx, _ in self._entries)

    def members(self, label):
        """Stored examples whose noisy label is ``label``, oldest first."""
        return list(self._by_label.get(label, {}).values())

    def class_counts(self):
        """dict[int, int]: number of stored examples per noisy label"""
        return {label: len(group) for label, group in sorted(self._by_label.items()) if group}

    def add(self, example):
        """Insert an example; raises :class:`~.InputError` if the memory is full."""
        if self.is_full:
            raise InputError("Cannot insert into a full memory; evict an example first.")
        if example.id in self._by_label.get(example.noisy_label, {}) or example.id in self:
            raise InputError(f"Example {example.id} is already stored in the memory.")

        self._entries.append((self._next_index, example))
        self._by_label.setdefault(example.noisy_label, {})[example.id] = example
        self._next_index += 1

    def remove_at(self, position):
        """Remove and return the example at ``position`` in insertion order."""
        _, example = self._entries.pop(position)
        group = self._by_label[example.noisy_label]
        del group[example.id]
        if not group:
            del self._by_label[example.noisy_label]
        return example

    def replace_at(self, position, example):
        """Evict the example at ``position`` and insert ``example`` as the newest entry."""
        evicted = self.remove_at(position)
        self.add(example)
        return evicted

    def snapshot(self):
        """Export the memory as a list of ``{id, noisy_label, true_label}`` records."""
        return [
            {"id": int(ex.id), "noisy_label": int(ex.noisy_label), "true_label": int(ex.true_label)}
            for ex in self
        ]

    def check_invariants(self):
        """Verify the capacity bound and the consistency of the per-class index.

        Raises:
            RunError: if an invariant is violated
        """
        if len(self._entries) > self.capacity:
            raise RunError(f"Memory holds {len(self._entries)} examples, capacity is {self.capacity}.")

        expected = Counter(ex.noisy_label for ex in self)
        indexed = {label: len(group) for label, group in self._by_label.items()}
        if dict(expected) != indexed:
            raise RunError("The per-class index of the memory is out of sync with its entries.")

        for label, group in self._by_label.items():
            if any(ex.noisy_label != label for ex in group.values()):
                raise RunError(f"The per-class index holds a mislabelled entry under {label}.")


@dataclass(frozen=True)
class BalancingCoefficient:
    """The coefficient trading purity against diversity in the memory score.

    Args:
        mode (str): ``"adaptive"`` or ``"fixed"``
        value (float or None): the static value for ``"fixed"``, in ``[0, 1]``
    """

    mode: str = "adaptive"
    value: float = None

    def __post_init__(self):
        if self.mode not in ("adaptive", "fixed"):
            raise ConfigError(f"Unknown alpha mode '{self.mode}'; use 'adaptive' or 'fixed:<value>'.")
        if self.mode == "fixed" and (self.value is None or not 0 <= self.value <= 1):
            raise ConfigError(f"A fixed alpha must lie in [0, 1], got {self.value}.")

    @classmethod
    def parse(cls, text):
        """Parse ``"adaptive"`` or ``"fixed:<value>"``."""
        text = str(text).strip()
        if text == "adaptive":
            return cls("adaptive")

        mode, sep, value = text.partition(":")
        if mode != "fixed" or not sep:
            raise ConfigError(f"Unknown alpha mode '{text}'; use 'adaptive' or 'fixed:<value>'.")
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"Cannot parse the fixed alpha value in '{text}'.") from None
        return cls("fixed", value)

    def __call__(self, batch_mean_loss):
        if self.mode == "fixed":
            return self.value
        return adaptive_alpha(batch_mean_loss)

    def __str__(self):
        return "adaptive" if self.mode == "adaptive" else f"fixed:{self.value}"


def adaptive_alpha(batch_mean_loss):
    """Adaptive balancing coefficient :math:`0.5 \\min(1/\\ell, 1)`.

    Args:
        batch_mean_loss (float): mean training loss of the current mini-batch

    Returns:
        float: a value in ``(0, 0.5]``; a zero loss maps to the cap ``0.5``
    """
    if not np.isfinite(batch_mean_loss) or batch_mean_loss < 0:
        raise InputError(f"The batch mean loss must be finite and non-negative, got {batch_mean_loss}.")
    if batch_mean_loss == 0:
        return 0.5
    return 0.5 * min(1.0 / batch_mean_loss, 1.0)


def relevance_mask(model, label):
    """Hidden units whose class-``label`` weight exceeds the mean weight over classes.

    The mask depends on the classification weights only, never on an input.

    Returns:
        array[bool]: mask over the hidden units
    """
    W2 = model.W2
    return W2[label] > W2.mean(axis=0)


def relevant_representation(model, x, label):
    """The representation of ``x`` restricted to the units relevant for ``label``.

    When no unit is relevant the full representation is returned, since a cosine over
    zero coordinates is undefined.
    """
    rep = forward(model, x).representation
    mask = relevance_mask(model, label)
    if not mask.any():
        return rep
    return rep[mask]


def _cosine(a, b):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def sample_score(model, memory, x, noisy_label, alpha):
    """Score of a candidate against the stored examples sharing its noisy label.

    Lower scores are kept. The diversity term is the mean cosine similarity of
    relevant representations and is ``0`` when no stored example shares the label.

    Args:
        model (Model): the live model
        memory (EpisodicMemory or Iterable[Example]): the stored examples
        x (array[float]): candidate features
        noisy_label (int): candidate label
        alpha (float): balancing coefficient in ``[0, 1]``

    Returns:
        float: the score
    """
    if not 0 <= alpha <= 1:
        raise InputError(f"alpha must lie in [0, 1], got {alpha}.")

    result = forward(model, x)
    loss = cross_entropy(result.probs, one_hot(noisy_label, model.num_classes))

    if isinstance(memory, EpisodicMemory):
        others = memory.members(noisy_label)
    else:
        others = [ex for ex in memory if ex.noisy_label == noisy_label]
    if not others:
        return (1 - alpha) * loss

    mask = relevance_mask(model, noisy_label)
    if not mask.any():
        mask = np.ones_like(mask)
    candidate = result.representation[mask]
    reps = forward_batch(model, np.array([ex.x for ex in others])).representation[:, mask]
    diversity = np.mean([_cosine(candidate, rep) for rep in reps])
    return (1 - alpha) * loss + alpha * diversity


def score_members(model, examples, alpha):
    """Scores of a set of examples, each against the other members sharing its label.

    This is the vectorised form of :func:`sample_score` used to pick an eviction: for
    every example the diversity term averages over the remaining same-label examples,
    never over itself.

    Returns:
        array[float]: one score per example, aligned with ``examples``
    """
    examples = list(examples)
    if not examples:
        return np.zeros(0)

    X = np.array([ex.x for ex in examples])
    labels = np.array([ex.noisy_label for ex in examples])
    result = forward_batch(model, X)
    targets = np.eye(model.num_classes)[labels]
    losses = cross_entropy(result.probs, targets)

    diversity = np.zeros(len(examples))
    for label in np.unique(labels):
        idx = np.flatnonzero(labels == label)
        if idx.size < 2:
            continue

        mask = relevance_mask(model, label)
        R = result.representation[idx][:, mask] if mask.any() else result.representation[idx]
        norms = np.linalg.norm(R, axis=1, keepdims=True)
        U = np.divide(R, norms, out=np.zeros_like(R), where=norms > 0)
        G = U @ U.T
        diversity[idx] = (G.sum(axis=1) - np.diag(G)) / (idx.size - 1)

    return (1 - alpha) * losses + alpha * diversity


def puridiver_update(memory, candidate, model, alpha):
    """Offer a candidate to the memory under the purity- and diversity-aware rule.

    Below capacity the candidate is inserted. Otherwise the candidate joins the memory
    and the highest-scoring of the ``K + 1`` examples is dropped; ties drop the oldest.

    Returns:
        EpisodicMemory: the updated memory
    """
    if not memory.is_full:
        memory.add(candidate)
        return memory

    pool = memory.examples + (candidate,)
    scores = score_members(model, pool, alpha)
    worst = int(np.argmax(scores))
    if worst < len(memory):
        memory.replace_at(worst, candidate)
    return memory


def reservoir_update(memory, candidate, n_seen, rng):
    """Reservoir sampling: keep each stream item with probability ``K / n_seen``.

    Args:
        memory (EpisodicMemory): the memory
        candidate (Example): the arriving example
        n_seen (int): number of stream examples seen so far, including ``candidate``
        rng (numpy.random.Generator): random generator

    Returns:
        EpisodicMemory: the updated memory
    """
    if n_seen < 1:
        raise InputError("n_seen counts the candidate and must be at least 1.")

    if not memory.is_full:
        memory.add(candidate)
        return memory

    slot = int(rng.integers(n_seen))
    if slot < memory.capacity:
        memory.replace_at(slot, candidate)
    return memory


def greedy_balanced_update(memory, candidate, rng):
    """Greedy class balancing: on overflow evict a random member of the largest class.

    When the candidate's own class is among the largest, the eviction comes from that
    class; other ties between equally large classes are broken uniformly at random.
    Under a class-balanced stream the class counts then never differ by more than one.

    Returns:
        EpisodicMemory: the updated memory
    """
    if not memory.is_full:
        memory.add(candidate)
        return memory

    counts = memory.class_counts()
    largest = max(counts.values())
    tied = [label for label, count in counts.items() if count == largest]
    # a tie including the candidate's class evicts from that class, not uniformly over the tie
    if candidate.noisy_label in tied:
        label = candidate.noisy_label
    else:
        label = tied[int(rng.integers(len(tied)))]

    positions = [i for i, ex in enumerate(memory.examples) if ex.noisy_label == label]
    memory.replace_at(positions[int(rng.integers(len(positions)))], candidate)
    return memory
