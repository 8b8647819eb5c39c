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
This module contains the robust use of a noisy episodic memory.

Before every memory-training epoch the memory is partitioned in two stages:

1. a two-component Gaussian mixture over per-example losses separates a *clean* set
   :math:`C` (small-loss component) from a *noisy* set :math:`N`;
2. a second mixture over the predictive uncertainty of :math:`N` separates a
   *re-label* set :math:`R` (low uncertainty) from an *unlabeled* set :math:`U`.

:math:`C` is trained with its given labels, :math:`R` with soft labels mixing the
prediction and the given label, and :math:`U` only through a consistency penalty
between strongly and weakly augmented views.
"""
# pylint: disable=too-many-arguments,too-many-locals
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit, logsumexp
from scipy.stats import norm

from .augment import FeatureAugmenter
from .exceptions import ConfigError, InputError, RunError
from .nnkit import (
    apply_gradients,
    cross_entropy,
    forward,
    forward_batch,
    one_hot,
    predictive_uncertainty,
    value_and_grad,
)

VAR_FLOOR = 1e-8
"""float: lower bound on mixture variances, in units of the sample variance"""

WEIGHT_FLOOR = 1e-3
"""float: a collapsed component lighter than this marks the fit degenerate"""

DIP_GRID = 257
"""int: grid points between the two means when looking for a density dip"""

ROBUST_MODES = ("none", "relabel_only", "consistency_only", "full")


@dataclass(frozen=True)
class GmmFit:
    """A two-component 1-D Gaussian mixture, components ordered by mean."""

    mean_small: float
    mean_large: float
    var_small: float
    var_large: float
    weight_small: float
    weight_large: float
    degenerate: bool = False
    log_likelihood: tuple = ()
    n_iter: int = 0
    converged: bool = False

    def _log_joint(self, value):
        value = np.asarray(value, dtype=float)
        small = math.log(self.weight_small) + norm.logpdf(value, self.mean_small, math.sqrt(self.var_small))
        large = math.log(self.weight_large) + norm.logpdf(value, self.mean_large, math.sqrt(self.var_large))
        return small, large


def _degenerate_fit(values, n_iter=0):
    mean = float(np.mean(values))
    var = max(float(np.var(values)), VAR_FLOOR)
    return GmmFit(mean, mean, var, var, 1.0, 0.0, degenerate=True, n_iter=n_iter, converged=True)


def _is_bimodal(mu, var, weight):
    """Whether the mixture density dips between the two means."""
    grid = np.linspace(mu[0], mu[1], DIP_GRID)
    density = np.exp(logsumexp(np.log(weight) + norm.logpdf(grid[:, None], mu, np.sqrt(var)), axis=1))
    return density[1:-1].min() < (1.0 - 1e-9) * min(density[0], density[-1])


def fit_gmm_1d(values, max_iter=100, tol=1e-6, seed=None):
    """Fit a two-component Gaussian mixture to scalar values by expectation maximisation.

    The values are standardised before fitting, so the variance floor is relative to
    their spread, and the parameters are mapped back afterwards. Means start at the 25th
    and 75th percentiles with equal weights and unit variance.

    A fit is degenerate when all values are equal, when a component collapses onto a
    single value with negligible weight, or when the fitted density has a single mode.
    A degenerate fit puts every value in the small component.

    Args:
        values (Sequence[float]): at least two finite values
        max_iter (int): maximum number of EM iterations
        tol (float): stop once the standardised log-likelihood changes by less than ``tol``
        seed (int or None): breaks ties when both initial means coincide

    Returns:
        GmmFit: the fitted mixture, with the log-likelihood history in the original units
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 2:
        raise InputError("A mixture fit needs at least two values.")
    if not np.all(np.isfinite(x)):
        raise InputError("A mixture fit needs finite values.")

    if np.ptp(x) == 0:
        warnings.warn("All values are identical; the mixture fit is degenerate.", UserWarning)
        return _degenerate_fit(x)

    center, scale = float(x.mean()), float(x.std())
    if scale == 0.0 or not np.all(np.isfinite((x - center) / scale)):
        warnings.warn("The values cannot be standardised; the mixture fit is degenerate.", UserWarning)
        return _degenerate_fit(x)
    z = (x - center) / scale

    mu = np.percentile(z, [25, 75]).astype(float)
    if mu[0] == mu[1]:
        rng = np.random.default_rng(seed)
        others = z[z != mu[0]]
        mu[1] = others[rng.integers(others.size)]
        mu.sort()
    var = np.ones(2)
    weight = np.full(2, 0.5)

    history = []
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        log_p = np.log(weight) + norm.logpdf(z[:, None], mu, np.sqrt(var))
        log_norm = logsumexp(log_p, axis=1)
        history.append(float(log_norm.sum()))

        resp = np.exp(log_p - log_norm[:, None])
        nk = np.maximum(resp.sum(axis=0), np.finfo(float).tiny)
        weight = np.clip(nk / z.size, np.finfo(float).tiny, None)
        weight /= weight.sum()
        mu = (resp * z[:, None]).sum(axis=0) / nk
        var = np.maximum((resp * (z[:, None] - mu) ** 2).sum(axis=0) / nk, VAR_FLOOR)

        if len(history) > 1 and abs(history[-1] - history[-2]) < tol:
            converged = True
            break

    order = np.argsort(mu, kind="stable")
    mu, var, weight = mu[order], var[order], weight[order]

    collapsed = (var <= VAR_FLOOR) & (weight < WEIGHT_FLOOR)
    if collapsed.any():
        warnings.warn("A mixture component collapsed; the fit is degenerate.", UserWarning)
        return _degenerate_fit(x, n_iter=n_iter)
    if not _is_bimodal(mu, var, weight):
        warnings.warn("The fitted mixture has a single mode; the fit is degenerate.", UserWarning)
        return _degenerate_fit(x, n_iter=n_iter)

    mu = center + scale * mu
    var = np.maximum(scale**2 * var, np.finfo(float).tiny)
    # change of variables back to the original units
    shift = x.size * math.log(scale)
    return GmmFit(
        float(mu[0]),
        float(mu[1]),
        float(var[0]),
        float(var[1]),
        float(weight[0]),
        float(weight[1]),
        log_likelihood=tuple(ll - shift for ll in history),
        n_iter=n_iter,
        converged=converged,
    )


def posterior_small(gmm, value):
    """Posterior probability that ``value`` belongs to the small-mean component.

    A degenerate fit assigns everything to the small component.
    """
    if gmm.degenerate:
        return 1.0 if np.ndim(value) == 0 else np.ones(np.shape(value))
    small, large = gmm._log_joint(value)
    p = expit(small - large)
    return float(p) if np.ndim(p) == 0 else p


def posterior_large(gmm, value):
    """Posterior probability that ``value`` belongs to the large-mean component."""
    if gmm.degenerate:
        return 0.0 if np.ndim(value) == 0 else np.zeros(np.shape(value))
    small, large = gmm._log_joint(value)
    p = expit(large - small)
    return float(p) if np.ndim(p) == 0 else p


def _losses(examples, model):
    X = np.array([ex.x for ex in examples])
    targets = np.eye(model.num_classes)[[ex.noisy_label for ex in examples]]
    return cross_entropy(forward_batch(model, X).probs, targets)


def split_clean_noisy(memory, model):
    """Split the memory into a small-loss clean set and a noisy set.

    Returns:
        tuple[list[Example], list[Example]]: ``(C, N)`` in memory order
    """
    examples = list(memory)
    if not examples:
        raise InputError("Cannot partition an empty memory.")
    if len(examples) < 2:
        return examples, []

    losses = _losses(examples, model)
    gmm = fit_gmm_1d(losses)
    if gmm.degenerate:
        return examples, []

    p_clean = posterior_small(gmm, losses)
    clean = [ex for ex, p in zip(examples, p_clean) if p >= 0.5]
    noisy = [ex for ex, p in zip(examples, p_clean) if p < 0.5]
    return clean, noisy


def _split_by_uncertainty(noisy, model):
    noisy = list(noisy)
    if len(noisy) < 2:
        return noisy, [], {ex.id: 1.0 for ex in noisy}

    probs = forward_batch(model, np.array([ex.x for ex in noisy])).probs
    uncertainty = predictive_uncertainty(probs)
    if np.ptp(uncertainty) == 0:
        return noisy, [], {ex.id: 1.0 for ex in noisy}

    gmm = fit_gmm_1d(uncertainty)
    p_certain = posterior_small(gmm, uncertainty)
    confidence = {ex.id: float(p) for ex, p in zip(noisy, p_certain)}
    relabel_set = [ex for ex, p in zip(noisy, p_certain) if p >= 0.5]
    unlabeled = [ex for ex, p in zip(noisy, p_certain) if p < 0.5]
    return relabel_set, unlabeled, confidence


def split_relabel_unlabeled(noisy, model):
    """Split the noisy set into a low-uncertainty re-label set and an unlabeled set.

    Returns:
        tuple[list[Example], list[Example]]: ``(R, U)``
    """
    relabel_set, unlabeled, _ = _split_by_uncertainty(noisy, model)
    return relabel_set, unlabeled


def relabel(example, model, p_u):
    """Soft label ``p_u * p(x) + (1 - p_u) * onehot(noisy_label)``."""
    if not 0 <= p_u <= 1:
        raise InputError(f"p_u must lie in [0, 1], got {p_u}.")
    probs = forward(model, example.x).probs
    return p_u * probs + (1 - p_u) * one_hot(example.noisy_label, model.num_classes)


def _purity(examples):
    if not examples:
        return None
    return sum(1 for ex in examples if ex.is_clean) / len(examples)


@dataclass(frozen=True)
class MemoryPartition:
    """The clean, re-label and unlabeled sets of a memory.

    ``confidence`` maps the id of every re-label example to its low-uncertainty posterior.
    """

    clean: tuple
    relabel: tuple = ()
    unlabeled: tuple = ()
    confidence: dict = field(default_factory=dict)

    def sizes(self):
        return {"clean": len(self.clean), "relabel": len(self.relabel), "unlabeled": len(self.unlabeled)}

    def purities(self):
        """Fraction of correctly labelled examples per set; ``None`` for an empty set."""
        return {
            "clean": _purity(self.clean),
            "relabel": _purity(self.relabel),
            "unlabeled": _purity(self.unlabeled),
        }

    def soft_labels(self, model):
        """list[array[float]]: soft labels of the re-label set, aligned with :attr:`relabel`"""
        return [relabel(ex, model, self.confidence.get(ex.id, 1.0)) for ex in self.relabel]

    def relabel_precision(self, model, soft_labels=None):
        """Fraction of the re-label set whose soft label's argmax is the true label."""
        if not self.relabel:
            return None
        if soft_labels is None:
            soft_labels = self.soft_labels(model)
        hits = sum(1 for ex, y in zip(self.relabel, soft_labels) if int(np.argmax(y)) == ex.true_label)
        return hits / len(self.relabel)

    def check(self, memory):
        """Raise :class:`~.RunError` unless the sets partition ``memory``."""
        ids = [ex.id for ex in self.clean + self.relabel + self.unlabeled]
        if len(ids) != len(set(ids)):
            raise RunError("The memory partition sets overlap.")
        if set(ids) != {ex.id for ex in memory}:
            raise RunError("The memory partition does not cover the memory.")


def partition_memory(memory, model, mode="full"):
    """Partition a memory according to a robust mode.

    * ``"none"``: everything is clean and trained with its given label
    * ``"relabel_only"``: the whole noisy set is re-labelled
    * ``"consistency_only"``: the whole noisy set is unlabeled
    * ``"full"``: the noisy set is split by uncertainty

    Returns:
        MemoryPartition: the partition
    """
    if mode not in ROBUST_MODES:
        raise ConfigError(f"Unknown robust mode '{mode}'; choose one of {list(ROBUST_MODES)}.")

    examples = list(memory)
    if not examples:
        raise InputError("Cannot partition an empty memory.")
    if mode == "none":
        return MemoryPartition(tuple(examples))

    clean, noisy = split_clean_noisy(examples, model)
    if mode == "consistency_only":
        return MemoryPartition(tuple(clean), unlabeled=tuple(noisy))

    relabel_set, unlabeled, confidence = _split_by_uncertainty(noisy, model)
    if mode == "relabel_only":
        return MemoryPartition(tuple(clean), relabel=tuple(noisy), confidence=confidence)
    return MemoryPartition(tuple(clean), tuple(relabel_set), tuple(unlabeled), confidence)


def consistency_loss(unlabeled, model, rng, augmenter=None):
    """Mean L2 distance between predictions on strong and weak views of ``unlabeled``."""
    unlabeled = list(unlabeled)
    if not unlabeled:
        return 0.0
    augmenter = augmenter or FeatureAugmenter()

    strong, weak = [], []
    for ex in unlabeled:
        strong.append(augmenter.strong(ex.x, rng))
        weak.append(augmenter.weak(ex.x, rng))
    diff = forward_batch(model, strong).probs - forward_batch(model, weak).probs
    return float(np.mean(np.linalg.norm(diff, axis=1)))


def classification_loss(clean, relabelled, model):
    """Mean cross-entropy over clean examples and re-labelled examples.

    Args:
        clean (Sequence[Example]): trained with their given labels
        relabelled (Sequence[tuple[Example, array[float]]]): examples with soft labels
        model (Model): the classifier

    Returns:
        float: the mean loss over ``C`` and ``R`` together
    """
    clean = list(clean)
    relabelled = list(relabelled)
    if not clean and not relabelled:
        warnings.warn("Both the clean and the re-label sets are empty.", UserWarning)
        return 0.0

    examples = clean + [ex for ex, _ in relabelled]
    targets = [one_hot(ex.noisy_label, model.num_classes) for ex in clean]
    targets += [np.asarray(y, dtype=float) for _, y in relabelled]
    probs = forward_batch(model, np.array([ex.x for ex in examples])).probs
    return float(np.mean(cross_entropy(probs, np.array(targets))))


@dataclass(frozen=True)
class PartitionAudit:
    """Sizes and purities of the memory partition at the start of an epoch."""

    epoch: int
    clean: int
    relabel: int
    unlabeled: int
    purity_clean: float = None
    purity_relabel: float = None
    purity_unlabeled: float = None
    relabel_precision: float = None

    def to_dict(self):
        return asdict(self)


def _take(order, cursor, count):
    """``count`` items of a permutation from ``cursor``, wrapping around."""
    if count == 0 or order.size == 0:
        return [], cursor
    idx = [int(order[(cursor + i) % order.size]) for i in range(count)]
    return idx, (cursor + count) % order.size


def memory_train_epoch(
    memory, model, eta, lr, rng, batch_size=16, mode="full", augmenter=None, epoch=0
):
    r"""One epoch of robust training on the memory.

    The partition and the soft labels are computed once with the model at the start
    of the epoch. Each of the :math:`\lceil |M| / b \rceil` steps draws
    :math:`\lceil b |X| / |M| \rceil` examples from every set :math:`X` and takes one
    gradient step on :math:`\ell_{cls} + \eta\,\ell_{reg}`.

    Args:
        memory (EpisodicMemory or Sequence[Example]): the memory
        model (Model): the classifier
        eta (float): weight of the consistency term; ``0`` disables it
        lr (float): learning rate
        rng (numpy.random.Generator): random generator for batching and augmentation
        batch_size (int): joint batch size
        mode (str): robust mode, see :func:`partition_memory`
        augmenter (FeatureAugmenter or None): augmentations for the consistency term
        epoch (int): epoch number recorded in the audit

    Returns:
        tuple[Model, PartitionAudit]: the trained model and the partition audit
    """
    if eta < 0:
        raise ConfigError(f"eta must be non-negative, got {eta}.")
    if batch_size < 1:
        raise InputError("The batch size must be at least 1.")
    augmenter = augmenter or FeatureAugmenter()

    partition = partition_memory(memory, model, mode)
    partition.check(memory)
    soft = partition.soft_labels(model)
    purities = partition.purities()
    audit = PartitionAudit(
        epoch,
        **partition.sizes(),
        purity_clean=purities["clean"],
        purity_relabel=purities["relabel"],
        purity_unlabeled=purities["unlabeled"],
        relabel_precision=partition.relabel_precision(model, soft),
    )

    C = model.num_classes
    supervised = [(ex.x, one_hot(ex.noisy_label, C), ex.id) for ex in partition.clean]
    supervised += [(ex.x, y, ex.id) for ex, y in zip(partition.relabel, soft)]
    unlabeled = list(partition.unlabeled) if eta > 0 else []

    n = len(partition.clean) + len(partition.relabel) + len(partition.unlabeled)
    steps = math.ceil(n / batch_size)

    order_c = rng.permutation(len(partition.clean))
    order_r = rng.permutation(len(partition.relabel))
    order_u = rng.permutation(len(unlabeled))
    quota_c = math.ceil(batch_size * len(partition.clean) / n)
    quota_r = math.ceil(batch_size * len(partition.relabel) / n)
    quota_u = math.ceil(batch_size * len(unlabeled) / n)
    offset_r = len(partition.clean)

    cursors = [0, 0, 0]
    for _ in range(steps):
        idx_c, cursors[0] = _take(order_c, cursors[0], quota_c)
        idx_r, cursors[1] = _take(order_r, cursors[1], quota_r)
        idx_u, cursors[2] = _take(order_u, cursors[2], quota_u)

        picked = [supervised[i] for i in idx_c] + [supervised[offset_r + i] for i in idx_r]
        views = []
        for i in idx_u:
            ex = unlabeled[i]
            views.append((augmenter.strong(ex.x, rng), augmenter.weak(ex.x, rng), ex.id))

        total = len(picked) + len(views)
        if total == 0:
            continue

        batch = [(x, y, total / len(picked)) for x, y, _ in picked]
        consistency = [(xs, xw, eta * total / len(views)) for xs, xw, _ in views]
        ids = [i for _, _, i in picked] + [i for _, _, i in views]

        _, grads = value_and_grad(model, batch, consistency=consistency, ids=ids)
        model = apply_gradients(model, grads, lr)

    return model, audit
