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
This module contains a minimal two-layer softmax classifier with manual backpropagation.

The classifier computes

.. math::

    f(x) = \mathrm{ReLU}(W_1 x + b_1), \qquad p_m(x) = \mathrm{softmax}(W_2 f(x) + b_2),

and exposes the representation :math:`f(x)` and the final-layer weights :math:`W_2`
that the memory score and the diversity metric are defined on.
"""
# pylint: disable=invalid-name
from dataclasses import dataclass, fields

import numpy as np
from scipy.special import softmax

from .exceptions import InputError, RunError

LOG_EPS = 1e-12
"""float: probabilities are clamped to this value inside logarithms"""

PARAMETERS = ("W1", "b1", "W2", "b2")


@dataclass(frozen=True)
class Model:
    """Parameters of a two-layer classifier.

    The model is a value: operations never mutate it and return new instances instead.

    Args:
        W1 (array[float]): hidden weights of shape ``(H, D)``
        b1 (array[float]): hidden biases of shape ``(H,)``
        W2 (array[float]): classification weights of shape ``(C, H)``; ``W2[c, e]``
            is the weight :math:`w(e, c)` connecting hidden unit ``e`` to class ``c``
        b2 (array[float]): classification biases of shape ``(C,)``
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, np.asarray(getattr(self, f.name), dtype=float))

        H, D = self.W1.shape
        C = self.W2.shape[0]
        if self.b1.shape != (H,) or self.W2.shape != (C, H) or self.b2.shape != (C,):
            raise InputError(
                f"Inconsistent parameter shapes: W1 {self.W1.shape}, b1 {self.b1.shape}, "
                f"W2 {self.W2.shape}, b2 {self.b2.shape}"
            )

    @property
    def input_dim(self):
        """int: input dimension D"""
        return self.W1.shape[1]

    @property
    def hidden_dim(self):
        """int: hidden dimension H"""
        return self.W1.shape[0]

    @property
    def num_classes(self):
        """int: number of classes C"""
        return self.W2.shape[0]

    def parameters(self):
        """Return the parameters as a dictionary keyed by name."""
        return {name: getattr(self, name) for name in PARAMETERS}

    def is_finite(self):
        """bool: whether every parameter entry is finite"""
        return all(np.all(np.isfinite(p)) for p in self.parameters().values())


@dataclass(frozen=True)
class ForwardResult:
    """Output of a forward pass.

    For a single input the arrays are 1-D; for a batch they carry a leading batch axis.
    """

    representation: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def init_model(input_dim, hidden_dim, num_classes, rng):
    """Initialise a model with entries drawn uniformly from
    :math:`[-1/\\sqrt{\\text{fan\\_in}}, 1/\\sqrt{\\text{fan\\_in}}]`.

    Args:
        input_dim (int): input dimension D
        hidden_dim (int): hidden dimension H
        num_classes (int): number of classes C
        rng (numpy.random.Generator): random generator

    Returns:
        Model: the initialised model
    """
    if min(input_dim, hidden_dim, num_classes) < 1:
        raise InputError("Model dimensions must be positive.")

    bound1 = 1 / np.sqrt(input_dim)
    bound2 = 1 / np.sqrt(hidden_dim)
    return Model(
        W1=rng.uniform(-bound1, bound1, size=(hidden_dim, input_dim)),
        b1=rng.uniform(-bound1, bound1, size=hidden_dim),
        W2=rng.uniform(-bound2, bound2, size=(num_classes, hidden_dim)),
        b2=rng.uniform(-bound2, bound2, size=num_classes),
    )


def _check_inputs(model, X):
    X = np.asarray(X, dtype=float)
    if X.shape[-1:] != (model.input_dim,):
        raise InputError(
            f"Input of shape {X.shape} does not match the model input dimension {model.input_dim}."
        )
    if not np.all(np.isfinite(X)):
        raise InputError("Inputs must be finite.")
    return X


def _forward(model, X):
    Z1 = X @ model.W1.T + model.b1
    H = np.maximum(Z1, 0.0)
    logits = H @ model.W2.T + model.b2
    return Z1, H, logits


def forward(model, x):
    """Run the model on a single feature vector.

    Args:
        model (Model): the classifier
        x (array[float]): feature vector of length D

    Returns:
        ForwardResult: representation, logits and softmax probabilities

    Raises:
        InputError: if ``x`` is not a finite vector of length D
    """
    x = _check_inputs(model, x)
    if x.ndim != 1:
        raise InputError("forward expects a single feature vector; use forward_batch.")
    _, h, logits = _forward(model, x)
    return ForwardResult(h, logits, softmax(logits))


def forward_batch(model, X):
    """Run the model on a batch of feature vectors of shape ``(n, D)``."""
    X = np.atleast_2d(_check_inputs(model, X))
    _, H, logits = _forward(model, X)
    return ForwardResult(H, logits, softmax(logits, axis=-1))


def one_hot(label, num_classes):
    """Return the one-hot distribution of ``label`` over ``num_classes`` classes."""
    target = np.zeros(num_classes)
    target[label] = 1.0
    return target


def cross_entropy(probs, target):
    r"""Cross-entropy :math:`-\sum_c t_c \log p_c` in nats.

    Probabilities are clamped at :data:`LOG_EPS` before taking the logarithm. Both
    arguments may carry leading batch axes, in which case one loss per row is returned.

    Args:
        probs (array[float]): predicted distribution(s)
        target (array[float]): target distribution(s); soft labels are allowed

    Returns:
        float or array[float]: the loss
    """
    probs = np.asarray(probs, dtype=float)
    target = np.asarray(target, dtype=float)
    if probs.shape != target.shape:
        raise InputError(f"Shape mismatch between probs {probs.shape} and target {target.shape}.")

    # zero-weight classes contribute exactly zero, even when clamped
    logp = np.log(np.clip(probs, LOG_EPS, 1.0))
    loss = -np.sum(np.where(target > 0, target * logp, 0.0), axis=-1)
    return float(loss) if loss.ndim == 0 else loss


def predictive_uncertainty(probs):
    """Predictive uncertainty :math:`1 - \\max_c p_c`.

    Args:
        probs (array[float]): a distribution, or a batch of distributions along the last axis

    Returns:
        float or array[float]: value(s) in :math:`[0, 1 - 1/C]`
    """
    probs = np.asarray(probs, dtype=float)
    if probs.size == 0 or not np.all(np.isfinite(probs)) or np.any(probs < 0):
        raise InputError("predictive_uncertainty expects finite non-negative probabilities.")
    if not np.allclose(probs.sum(axis=-1), 1.0, atol=1e-6):
        raise InputError("predictive_uncertainty expects probabilities summing to one.")

    u = 1.0 - probs.max(axis=-1)
    return float(u) if np.ndim(u) == 0 else u


def _stack_batch(batch, num_classes):
    X = np.array([item[0] for item in batch], dtype=float)
    T = np.array([item[1] for item in batch], dtype=float).reshape(len(batch), num_classes)
    w = np.array([item[2] for item in batch], dtype=float)
    return X, T, w


def value_and_grad(model, batch, consistency=(), ids=None):
    r"""Objective value and its exact gradient, by manual backpropagation.

    The objective is the mean, over all ``len(batch) + len(consistency)`` items, of

    * ``weight * cross_entropy(p(x), target)`` for each ``(x, target, weight)`` in ``batch``,
    * ``weight * ||p(x_strong) - p(x_weak)||_2`` for each ``(x_strong, x_weak, weight)``
      in ``consistency``; the gradient flows through both branches.

    Args:
        model (Model): the classifier
        batch (Sequence[tuple]): supervised items ``(x, target, weight)``
        consistency (Sequence[tuple]): consistency items ``(x_strong, x_weak, weight)``
        ids (Sequence[int] or None): example ids aligned with ``batch`` followed by
            ``consistency``, used to report the offending example on failure

    Returns:
        tuple[float, dict[str, array[float]]]: objective value and gradients keyed by
        parameter name

    Raises:
        InputError: if both ``batch`` and ``consistency`` are empty
        RunError: if the gradient is not finite
    """
    batch = list(batch)
    consistency = list(consistency)
    n, m = len(batch), len(consistency)
    total = n + m
    if total == 0:
        raise InputError("Cannot compute a gradient on an empty batch.")

    C = model.num_classes
    inputs, dlogits, losses = [], [], []

    if n:
        X, T, w = _stack_batch(batch, C)
        X = _check_inputs(model, X)
        _, _, logits = _forward(model, X)
        P = softmax(logits, axis=-1)
        losses.append(w * cross_entropy(P, T))
        # d/dz of -sum_c t_c log softmax(z)_c
        G = P * T.sum(axis=1, keepdims=True) - T
        inputs.append(X)
        dlogits.append(G * (w / total)[:, None])

    if m:
        Xs = _check_inputs(model, np.array([item[0] for item in consistency], dtype=float))
        Xw = _check_inputs(model, np.array([item[1] for item in consistency], dtype=float))
        wc = np.array([item[2] for item in consistency], dtype=float)

        Ps = softmax(_forward(model, Xs)[2], axis=-1)
        Pw = softmax(_forward(model, Xw)[2], axis=-1)
        diff = Ps - Pw
        norm = np.linalg.norm(diff, axis=1)
        losses.append(wc * norm)

        g = np.divide(diff, norm[:, None], out=np.zeros_like(diff), where=norm[:, None] > 0)
        # softmax Jacobian-vector product: p * (g - <g, p>)
        Gs = Ps * (g - np.sum(g * Ps, axis=1, keepdims=True))
        Gw = Pw * (-g + np.sum(g * Pw, axis=1, keepdims=True))
        scale = (wc / total)[:, None]
        inputs.extend([Xs, Xw])
        dlogits.extend([Gs * scale, Gw * scale])

    X_all = np.vstack(inputs)
    dZ2 = np.vstack(dlogits)
    Z1, H, _ = _forward(model, X_all)

    dH = dZ2 @ model.W2
    dZ1 = dH * (Z1 > 0)
    grads = {
        "W1": dZ1.T @ X_all,
        "b1": dZ1.sum(axis=0),
        "W2": dZ2.T @ H,
        "b2": dZ2.sum(axis=0),
    }

    if not all(np.all(np.isfinite(g)) for g in grads.values()):
        bad_rows = np.flatnonzero(~np.all(np.isfinite(dZ1), axis=1) | ~np.all(np.isfinite(dZ2), axis=1))
        row = int(bad_rows[0]) if bad_rows.size else 0
        # rows are [batch, strong, weak]; fold the two consistency blocks back onto items
        item = row if row < n else n + (row - n) % max(m, 1)
        example_id = ids[item] if ids is not None and item < len(ids) else None
        raise RunError("Non-finite gradient encountered", example_id=example_id)

    value = float(np.concatenate(losses).sum() / total)
    return value, grads


def batch_loss(model, batch, consistency=()):
    """Objective value of :func:`value_and_grad` without the gradient."""
    batch = list(batch)
    consistency = list(consistency)
    total = len(batch) + len(consistency)
    if total == 0:
        raise InputError("Cannot evaluate the loss of an empty batch.")

    value = 0.0
    if batch:
        X, T, w = _stack_batch(batch, model.num_classes)
        value += float(np.sum(w * cross_entropy(forward_batch(model, X).probs, T)))
    if consistency:
        Ps = forward_batch(model, [item[0] for item in consistency]).probs
        Pw = forward_batch(model, [item[1] for item in consistency]).probs
        wc = np.array([item[2] for item in consistency], dtype=float)
        value += float(np.sum(wc * np.linalg.norm(Ps - Pw, axis=1)))
    return value / total


def apply_gradients(model, grads, lr):
    """Return the model after one gradient-descent update with step size ``lr``."""
    if lr < 0:
        raise InputError("The learning rate must be non-negative.")
    if lr == 0:
        return model
    return Model(**{name: p - lr * grads[name] for name, p in model.parameters().items()})


def sgd_step(model, batch, lr, consistency=(), ids=None):
    """One stochastic gradient-descent step on the mean weighted loss of a batch.

    Args:
        model (Model): the classifier
        batch (Sequence[tuple]): items ``(x, target, weight)``; ``target`` is a
            distribution over classes (hard labels are one-hot)
        lr (float): the learning rate
        consistency (Sequence[tuple]): optional consistency items, see :func:`value_and_grad`
        ids (Sequence[int] or None): example ids for error reporting

    Returns:
        Model: the updated model
    """
    _, grads = value_and_grad(model, batch, consistency=consistency, ids=ids)
    return apply_gradients(model, grads, lr)


def cosine_lr(base_lr, epoch, total_epochs):
    """Cosine-annealed learning rate for ``epoch`` (0-based) out of ``total_epochs``."""
    if total_epochs <= 0:
        return base_lr
    return 0.5 * base_lr * (1 + np.cos(np.pi * epoch / total_epochs))


def save_model(model, path):
    """Save the model parameters to an ``.npz`` file."""
    np.savez(path, **model.parameters())


def load_model(path):
    """Load a model saved with :func:`save_model`."""
    with np.load(path) as data:
        return Model(**{name: data[name] for name in PARAMETERS})
