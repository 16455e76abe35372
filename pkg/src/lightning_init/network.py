"""Dense feed-forward networks with exact backpropagation and masked SGD.

All arithmetic is float64. Weight matrices are stored ``(fan_in, fan_out)``
so a batch propagates as ``inputs @ weights + biases``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import ConfigurationError, InputError, NumericalError

logger = logging.getLogger(__name__)

_EVAL_CHUNK = 10000


class Activation(str, Enum):
    RELU = "relu"
    SOFTMAX = "softmax"
    LINEAR = "linear"


def default_layer_names(n_layers: int) -> list[str]:
    """``["hidden 0", ..., "output"]`` for a stack of ``n_layers`` dense layers."""
    return [f"hidden {i}" for i in range(n_layers - 1)] + ["output"]


@dataclass
class DenseLayer:
    """One fully connected layer.

    ``mask`` marks trainable entries with 1; entries with mask 0 are pruned
    and are forced to exactly zero on construction and after every update.
    """

    weights: np.ndarray
    biases: np.ndarray | None = None
    activation: Activation = Activation.RELU
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or 0 in self.weights.shape:
            raise ConfigurationError(
                f"weights must be a non-empty 2-d matrix, got shape {self.weights.shape}"
            )
        fan_in, fan_out = self.weights.shape
        if self.biases is None:
            self.biases = np.zeros(fan_out)
        else:
            self.biases = np.array(self.biases, dtype=np.float64).reshape(-1)
        if self.biases.shape != (fan_out,):
            raise ConfigurationError(
                f"biases shape {self.biases.shape} does not match fan_out {fan_out}"
            )
        if self.mask is None:
            self.mask = np.ones_like(self.weights)
        else:
            self.mask = np.array(self.mask, dtype=np.float64)
        if self.mask.shape != self.weights.shape:
            raise ConfigurationError("mask shape must equal weights shape")
        if not np.isin(self.mask, (0.0, 1.0)).all():
            raise ConfigurationError("mask entries must be 0 or 1")
        self.activation = Activation(self.activation)
        self.weights[self.mask == 0] = 0.0

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.biases.copy(), self.activation, self.mask.copy())


@dataclass
class DenseNetwork:
    layers: list[DenseLayer]
    layer_names: list[str] | None = None

    def __post_init__(self):
        self.layers = list(self.layers)
        if not self.layers:
            raise ConfigurationError("a network needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers[:-1], self.layers[1:])):
            if a.fan_out != b.fan_in:
                raise ConfigurationError(
                    f"layer {i} fan_out {a.fan_out} != layer {i + 1} fan_in {b.fan_in}"
                )
        for layer in self.layers[:-1]:
            if layer.activation is Activation.SOFTMAX:
                raise ConfigurationError("softmax is only allowed on the final layer")
        if self.layer_names is None:
            self.layer_names = default_layer_names(len(self.layers))
        elif len(self.layer_names) != len(self.layers):
            raise ConfigurationError("one name per layer required")
        self.layer_names = list(self.layer_names)

    @classmethod
    def from_weights(
        cls,
        weights: Sequence[np.ndarray],
        activations: Sequence[Activation | str] | None = None,
        layer_names: Sequence[str] | None = None,
        masks: Sequence[np.ndarray] | None = None,
    ) -> "DenseNetwork":
        """Build a network with zero biases; default activations are relu, ..., softmax."""
        if activations is None:
            activations = [Activation.RELU] * (len(weights) - 1) + [Activation.SOFTMAX]
        if masks is None:
            masks = [None] * len(weights)
        layers = [
            DenseLayer(w, None, act, m) for w, act, m in zip(weights, activations, masks)
        ]
        return cls(layers, None if layer_names is None else list(layer_names))

    @property
    def layer_sizes(self) -> list[int]:
        return [self.layers[0].fan_in] + [layer.fan_out for layer in self.layers]

    @property
    def n_edges(self) -> int:
        return sum(layer.weights.size for layer in self.layers)

    @property
    def weights(self) -> list[np.ndarray]:
        return [layer.weights for layer in self.layers]

    def copy(self) -> "DenseNetwork":
        return DenseNetwork([layer.copy() for layer in self.layers], list(self.layer_names))


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 100
    epochs: int = 30
    rng_seed: int = 0
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be > 0")
        if int(self.batch_size) < 1:
            raise ConfigurationError("batch_size must be positive")
        if int(self.epochs) < 0:
            raise ConfigurationError("epochs must be >= 0")
        self.batch_size = int(self.batch_size)
        self.epochs = int(self.epochs)
        self.rng_seed = int(self.rng_seed)


@dataclass
class ExperimentRecord:
    """Metrics of one training epoch."""

    epoch: int
    train_loss: float
    train_accuracy: float
    val_accuracy: float | None
    wall_time_s: float
    path_fractions: dict[int, float] = field(default_factory=dict)

    @property
    def path_fraction_1000(self) -> float | None:
        return self.path_fractions.get(1000)

    @property
    def path_fraction_10000(self) -> float | None:
        return self.path_fractions.get(10000)


Hook = Callable[[DenseNetwork, ExperimentRecord], None]


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.RELU:
        return np.maximum(z, 0.0)
    if activation is Activation.SOFTMAX:
        return _softmax(z)
    return z


def _check_inputs(net: DenseNetwork, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.layers[0].fan_in:
        raise ConfigurationError(
            f"input shape {x.shape} incompatible with fan_in {net.layers[0].fan_in}"
        )
    if not np.isfinite(x).all():
        raise InputError("inputs contain non-finite values")
    return x


def forward(net: DenseNetwork, inputs, return_cache: bool = False):
    """Run a batch through ``net``.

    With ``return_cache`` the result is ``(outputs, cache)`` where ``cache`` holds
    ``(layer_input, pre_activation)`` per layer, as needed by backprop.
    """
    a = _check_inputs(net, inputs)
    cache = []
    for layer in net.layers:
        z = a @ layer.weights + layer.biases
        cache.append((a, z))
        a = _activate(z, layer.activation)
    if return_cache:
        return a, cache
    return a


def _backprop(net: DenseNetwork, inputs, one_hot_targets, batch_index=None):
    if net.layers[-1].activation is not Activation.SOFTMAX:
        raise ConfigurationError("cross-entropy training requires a softmax output layer")
    probs, cache = forward(net, inputs, return_cache=True)
    y = np.asarray(one_hot_targets, dtype=np.float64)
    if y.shape != probs.shape:
        raise InputError(f"targets shape {y.shape} != outputs shape {probs.shape}")
    n = y.shape[0]
    if n == 0:
        raise InputError("empty batch")

    # log-softmax straight from the logits avoids log(0)
    z = cache[-1][1]
    z = z - z.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-(y * log_probs).sum() / n)
    if not math.isfinite(loss):
        raise NumericalError(f"loss is {loss}", batch_index=batch_index)

    grads = [None] * len(net.layers)
    delta = (probs - y) / n
    for i in range(len(net.layers) - 1, -1, -1):
        a_in, _ = cache[i]
        grads[i] = (a_in.T @ delta, delta.sum(axis=0))
        if i > 0:
            prev_z = cache[i - 1][1]
            delta = delta @ net.layers[i].weights.T
            act = net.layers[i - 1].activation
            if act is Activation.RELU:
                delta = delta * (prev_z > 0)
    return loss, grads, probs


def loss_and_gradients(net: DenseNetwork, inputs, one_hot_targets, batch_index=None):
    """Mean categorical cross-entropy and its gradients.

    Returns ``(loss, [(dW, db), ...])``. Gradients are unmasked; pruned entries
    are zeroed by :func:`sgd_step`.
    """
    loss, grads, _ = _backprop(net, inputs, one_hot_targets, batch_index)
    return loss, grads


def sgd_step(net: DenseNetwork, gradients, learning_rate: float) -> DenseNetwork:
    """In-place masked SGD update; returns ``net`` for chaining."""
    if len(gradients) != len(net.layers):
        raise ConfigurationError("one (dW, db) pair per layer required")
    for layer, (gw, gb) in zip(net.layers, gradients):
        if np.shape(gw) != layer.weights.shape or np.shape(gb) != layer.biases.shape:
            raise ConfigurationError("gradient shape does not match parameters")
        layer.weights -= learning_rate * (gw * layer.mask)
        layer.biases -= learning_rate * gb
    return net


def evaluate(net: DenseNetwork, inputs, labels) -> float:
    """Fraction of samples whose argmax output equals the label."""
    labels = np.asarray(labels).reshape(-1)
    inputs = np.asarray(inputs)
    if labels.size == 0 or inputs.shape[0] == 0:
        raise InputError("cannot evaluate on an empty dataset")
    if inputs.shape[0] != labels.size:
        raise InputError("inputs and labels differ in length")
    correct = 0
    for start in range(0, labels.size, _EVAL_CHUNK):
        out = forward(net, inputs[start:start + _EVAL_CHUNK])
        correct += int((out.argmax(axis=1) == labels[start:start + _EVAL_CHUNK]).sum())
    return correct / labels.size


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def train(
    net: DenseNetwork,
    dataset,
    config: TrainConfig,
    validation=None,
    hooks: Iterable[Hook] = (),
) -> list[ExperimentRecord]:
    """Masked minibatch SGD on ``dataset`` (anything with ``images`` and ``labels``).

    ``net`` is updated in place. ``validation`` supplies ``val_accuracy`` after
    every epoch; hooks then run with the finished record and may add to it.
    """
    x = np.asarray(dataset.images, dtype=np.float64)
    labels = np.asarray(dataset.labels, dtype=np.int64)
    n = labels.size
    if n == 0:
        raise InputError("empty training set")
    if config.batch_size > n:
        raise ConfigurationError(f"batch_size {config.batch_size} exceeds training-set size {n}")
    n_classes = net.layers[-1].fan_out
    hooks = list(hooks)
    rng = np.random.default_rng(config.rng_seed)
    records = []
    order = np.arange(n)
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        if config.shuffle_each_epoch:
            order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            try:
                loss, grads, probs = _backprop(net, x[idx], one_hot(labels[idx], n_classes), b)
            except NumericalError as err:
                raise NumericalError(
                    f"training diverged in epoch {epoch}: {err}", batch_index=b, epoch=epoch
                ) from err
            sgd_step(net, grads, config.learning_rate)
            total_loss += loss * idx.size
            correct += int((probs.argmax(axis=1) == labels[idx]).sum())
        val_acc = None
        if validation is not None:
            val_acc = evaluate(net, validation.images, validation.labels)
        record = ExperimentRecord(
            epoch=epoch,
            train_loss=total_loss / n,
            train_accuracy=correct / n,
            val_accuracy=val_acc,
            wall_time_s=time.perf_counter() - t0,
        )
        for hook in hooks:
            hook(net, record)
        logger.info(
            "epoch %d loss %.4f train_acc %.4f val_acc %s",
            epoch, record.train_loss, record.train_accuracy, val_acc,
        )
        records.append(record)
    return records
