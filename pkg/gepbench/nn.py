"""A small multilayer perceptron trained with plain SGD.

This is the deterministic numerical substrate the scoring functions run on:
a feed-forward classifier on dense feature vectors, its softmax, mini-batch
cross-entropy training and a finite-difference gradient check.

All arithmetic is 64-bit. A model is a pure function of its parameters, and
:func:`train_sgd` is a pure function of ``(data, cfg, dims)``; the only source
of randomness is ``cfg.seed``, split into an initialisation stream
(``split(seed, 0)``) and an epoch shuffling stream (``split(seed, 1)``).

Initialisation
==============
Weights and biases of a layer with ``fan_in`` inputs are drawn uniformly from
``[-1/sqrt(fan_in), +1/sqrt(fan_in)]``, weights first then biases, layer by
layer.

Model
=====
- :py:class:`MlpModel`
- :py:class:`TrainConfig`
- :py:meth:`init_model`
- :py:meth:`forward`
- :py:meth:`softmax`
- :py:meth:`predict`
- :py:meth:`accuracy`

Training
========
- :py:meth:`loss_and_gradients`
- :py:meth:`train_sgd`
- :py:meth:`grad_check`
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy import special

from . import config
from .rng import SEED_MAX, Rng, split


logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "tanh")


class DimensionError(ValueError):
    """An array did not have the shape an operation expected.

    Parameters
    ----------
    message : str
        Description of what was being checked.
    expected, actual : int or tuple
        The expected and the actual dimensions.
    """

    def __init__(self, message, expected=None, actual=None):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{message} (expected {expected}, got {actual})")


class LabelRangeError(ValueError):
    """A label was outside ``[0, n_classes)``."""


class TrainingDivergedError(FloatingPointError):
    """The training loss stopped being finite.

    Attributes
    ----------
    iteration : int
        Index of the SGD step (counted from zero over all epochs).
    loss : float
        The offending loss value.
    """

    def __init__(self, iteration, loss):
        self.iteration = iteration
        self.loss = loss
        super().__init__(
            f"Training loss became non-finite at iteration {iteration} (loss={loss})."
        )


def as_matrix(values, name="matrix"):
    """Check and convert to a finite, 2D, 64-bit array.

    Parameters
    ----------
    values : array_like
    name : str
        Used in error messages.

    Returns
    -------
    matrix : np.ndarray[rows, cols]
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two dimensional", 2, arr.ndim)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries.")
    return arr


class TrainConfig(config.Reader):
    """Settings for :func:`train_sgd`.

    Attributes
    ----------
    epochs : int
        Passes over the training data. Default 200.
    learning_rate : float
        SGD step size. Default 0.05. Zero is accepted and leaves the model at
        its initialisation.
    batch_size : int
        Mini-batch size. Default 32.
    weight_decay : float
        L2 penalty coefficient on the weights (not the biases). Default 0.
    activation : str
        Hidden layer non-linearity, one of "relu" or "tanh".
    seed : int
        Root seed for initialisation and shuffling.
    """

    epochs = config.int_in_range(1, default=200)
    learning_rate = config.float_in_range(0.0, None, default=0.05)
    batch_size = config.int_in_range(1, default=32)
    weight_decay = config.float_in_range(0.0, None, default=0.0)
    activation = config.enum(ACTIVATIONS, default="relu")
    seed = config.int_in_range(0, SEED_MAX, default=0)


@dataclass(frozen=True, eq=False)
class MlpModel:
    """Parameters of a feed-forward classifier.

    The final layer emits raw logits; `activation` applies to hidden layers
    only. Parameter arrays are copied and made read-only on construction.

    Attributes
    ----------
    layer_dims : tuple of int
        ``(n_inputs, hidden..., n_classes)``.
    weights : tuple of np.ndarray
        ``weights[i]`` has shape ``(layer_dims[i], layer_dims[i + 1])``.
    biases : tuple of np.ndarray
        ``biases[i]`` has length ``layer_dims[i + 1]``.
    activation : str
        "relu" or "tanh".
    loss_history : tuple of float
        Mean training loss per epoch, if the model came out of
        :func:`train_sgd`. Not part of model equality.
    """

    layer_dims: Tuple[int, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    activation: str = "relu"
    loss_history: Tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"Invalid layer dimensions {dims}.")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation '{self.activation}'.")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise DimensionError(
                "Number of parameter arrays does not match layer_dims",
                len(dims) - 1,
                (len(self.weights), len(self.biases)),
            )

        weights, biases = [], []
        for ii, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = as_matrix(w, f"weights[{ii}]").copy()
            b = np.array(b, dtype=np.float64)
            if w.shape != (dims[ii], dims[ii + 1]):
                raise DimensionError(
                    f"weights[{ii}] has the wrong shape", (dims[ii], dims[ii + 1]), w.shape
                )
            if b.shape != (dims[ii + 1],):
                raise DimensionError(
                    f"biases[{ii}] has the wrong shape", (dims[ii + 1],), b.shape
                )
            if not np.all(np.isfinite(b)):
                raise ValueError(f"biases[{ii}] contains non-finite entries.")
            w.setflags(write=False)
            b.setflags(write=False)
            weights.append(w)
            biases.append(b)

        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "weights", tuple(weights))
        object.__setattr__(self, "biases", tuple(biases))
        object.__setattr__(self, "loss_history", tuple(self.loss_history))

    @property
    def n_inputs(self):
        """Input feature dimension."""
        return self.layer_dims[0]

    @property
    def n_classes(self):
        """Number of output logits."""
        return self.layer_dims[-1]

    def parameters(self):
        """All parameter arrays in a fixed order (w0, b0, w1, b1, ...)."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def __eq__(self, other):
        if not isinstance(other, MlpModel):
            return NotImplemented
        return (
            self.layer_dims == other.layer_dims
            and self.activation == other.activation
            and all(
                np.array_equal(a, b)
                for a, b in zip(self.parameters(), other.parameters())
            )
        )

    __hash__ = None


def init_model(dims, activation="relu", seed=0):
    """Create a model with the documented uniform initialisation.

    Parameters
    ----------
    dims : sequence of int
        Layer dimensions, input first.
    activation : str
        Hidden layer non-linearity.
    seed : int
        Seed of the initialisation stream.

    Returns
    -------
    model : MlpModel
    """
    dims = tuple(int(d) for d in dims)
    rng = Rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpModel(dims, tuple(weights), tuple(biases), activation)


def _activate(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(z, a, activation):
    if activation == "relu":
        return (z > 0.0).astype(np.float64)
    return 1.0 - a**2


def _check_input(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise DimensionError("Input must be a vector or a batch of vectors", (1, 2), x.ndim)
    if x.shape[-1] != model.n_inputs:
        raise DimensionError(
            "Input feature dimension does not match the model", model.n_inputs, x.shape[-1]
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("Input contains non-finite entries.")
    return x


def forward(model, x):
    """Evaluate the logits of a model.

    Parameters
    ----------
    model : MlpModel
    x : np.ndarray[n_inputs] or np.ndarray[n_samples, n_inputs]

    Returns
    -------
    logits : np.ndarray[n_classes] or np.ndarray[n_samples, n_classes]

    Raises
    ------
    DimensionError
        If the feature dimension does not match ``model.layer_dims[0]``.
    """
    h = _check_input(model, x)
    last = len(model.weights) - 1
    for ii, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if ii < last:
            h = _activate(h, model.activation)
    return h


def softmax(logits):
    """Softmax over the last axis, stabilised by subtracting the maximum.

    Parameters
    ----------
    logits : array_like
        Finite logits, a vector or a batch.

    Returns
    -------
    probs : np.ndarray
        Same shape as `logits`.
    """
    return special.softmax(np.asarray(logits, dtype=np.float64), axis=-1)


def predict(model, x):
    """Predicted class per sample, ties going to the lowest index."""
    return np.argmax(forward(model, x), axis=-1)


def accuracy(model, data):
    """Fraction of `data` the model classifies correctly."""
    return float(np.mean(predict(model, data.features) == data.labels))


def _check_labels(labels, n_classes):
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        bad = labels[(labels < 0) | (labels >= n_classes)][0]
        raise LabelRangeError(f"Label {bad} outside [0, {n_classes}).")
    return labels.astype(np.intp)


def loss_and_gradients(model, x, y, weight_decay=0.0):
    """Mean cross-entropy of a batch and its analytic gradient.

    The loss is ``mean_i(-log softmax(f(x_i))[y_i]) + weight_decay / 2 * sum ||W||^2``.

    Parameters
    ----------
    model : MlpModel
    x : np.ndarray[n, n_inputs]
    y : np.ndarray[n]
        Integer labels.
    weight_decay : float

    Returns
    -------
    loss : float
    grad_weights, grad_biases : list of np.ndarray
        Same shapes as the model parameters.
    """
    x = np.atleast_2d(_check_input(model, x))
    y = _check_labels(y, model.n_classes)
    if y.shape != (x.shape[0],):
        raise DimensionError("Label count does not match the batch", x.shape[0], y.shape)

    return _loss_and_gradients(model.weights, model.biases, model.activation, x, y, weight_decay)


def _loss_and_gradients(weights, biases, activation, x, y, weight_decay):
    # Unchecked core of loss_and_gradients working on raw parameter lists
    n = x.shape[0]

    # Forward pass, remembering pre- and post-activations
    pre, post = [], [x]
    h = x
    last = len(weights) - 1
    for ii, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        pre.append(z)
        h = _activate(z, activation) if ii < last else z
        post.append(h)

    logp = special.log_softmax(h, axis=1)
    loss = -np.mean(logp[np.arange(n), y])
    if weight_decay:
        loss += 0.5 * weight_decay * sum(np.sum(w**2) for w in weights)

    # Backward pass
    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grad_w = [None] * len(weights)
    grad_b = [None] * len(weights)
    for ii in range(last, -1, -1):
        grad_w[ii] = post[ii].T @ delta + weight_decay * weights[ii]
        grad_b[ii] = delta.sum(axis=0)
        if ii > 0:
            da = delta @ weights[ii].T
            delta = da * _activation_grad(pre[ii - 1], post[ii], activation)

    return float(loss), grad_w, grad_b


def train_sgd(data, cfg, dims):
    """Train a classifier with mini-batch SGD on cross-entropy.

    Parameters
    ----------
    data : LabeledDataset
        Training data.
    cfg : TrainConfig
    dims : sequence of int
        Layer dimensions. ``dims[0]`` must equal the feature dimension and the
        labels must lie in ``[0, dims[-1])``.

    Returns
    -------
    model : MlpModel
        Bitwise reproducible for identical arguments. `loss_history` holds the
        mean loss of each epoch.

    Raises
    ------
    DimensionError
        If `dims` does not fit the data.
    LabelRangeError
        If a label is outside ``[0, dims[-1])``.
    TrainingDivergedError
        If a mini-batch loss becomes NaN or infinite.
    """
    dims = tuple(int(d) for d in dims)
    x = np.asarray(data.features, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        raise ValueError("Cannot train on an empty dataset.")
    if dims[0] != x.shape[1]:
        raise DimensionError("dims[0] must equal the feature dimension", x.shape[1], dims[0])
    y = _check_labels(data.labels, dims[-1])

    model = init_model(dims, cfg.activation, split(cfg.seed, 0))
    shuffler = Rng(split(cfg.seed, 1))

    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    lr = cfg.learning_rate
    batch = cfg.batch_size

    history = []
    iteration = 0
    for epoch in range(cfg.epochs):
        order = shuffler.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            loss, gw, gb = _loss_and_gradients(
                weights, biases, cfg.activation, x[idx], y[idx], cfg.weight_decay
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(iteration, loss)
            for ii in range(len(weights)):
                weights[ii] -= lr * gw[ii]
                biases[ii] -= lr * gb[ii]
            total += loss * len(idx)
            iteration += 1
        history.append(total / n)
        logger.debug("epoch %d/%d: mean loss %.6f", epoch + 1, cfg.epochs, history[-1])

    if not all(np.all(np.isfinite(w)) for w in weights + biases):
        raise TrainingDivergedError(iteration, float("nan"))

    logger.debug("Trained %s model for %d epochs (final loss %.4f)", dims, cfg.epochs, history[-1])

    return MlpModel(dims, tuple(weights), tuple(biases), cfg.activation, tuple(history))


def grad_check(model, batch, epsilon=1e-5, weight_decay=0.0):
    """Compare the analytic gradient with central finite differences.

    Every parameter is perturbed by ``+/- epsilon`` in turn. The relative
    error of a parameter is ``|a - n| / max(|a| + |n|, 1e-6)``, where the
    floor keeps round-off on vanishing gradients from counting as error.

    Parameters
    ----------
    model : MlpModel
    batch : LabeledDataset
    epsilon : float
        Step size, in ``[1e-7, 1e-3]``.
    weight_decay : float

    Returns
    -------
    max_relative_error : float
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon {epsilon} outside [1e-7, 1e-3].")

    x, y = batch.features, batch.labels
    _, grad_w, grad_b = loss_and_gradients(model, x, y, weight_decay)
    analytic = []
    for gw, gb in zip(grad_w, grad_b):
        analytic.extend([gw, gb])

    params = [p.copy() for p in model.parameters()]

    def _loss(ps):
        m = MlpModel(model.layer_dims, tuple(ps[0::2]), tuple(ps[1::2]), model.activation)
        return loss_and_gradients(m, x, y, weight_decay)[0]

    worst = 0.0
    for pi, p in enumerate(params):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + epsilon
            up = _loss(params)
            p[idx] = orig - epsilon
            down = _loss(params)
            p[idx] = orig
            numeric = (up - down) / (2 * epsilon)
            a = analytic[pi][idx]
            rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-6)
            worst = max(worst, rel)

    return worst
