"""Dense ReLU classifier with reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import Tensor, relu


class NonFiniteError(FloatingPointError):
    """A forward value, loss, or gradient was NaN or infinite."""

    def __init__(self, stage, detail=""):
        self.stage = stage
        msg = f"non-finite value in {stage}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


@dataclass
class ParameterSet:
    """Weights and biases of every layer, in order.

    Each weight matrix has shape ``(out, in)``. The same class doubles as the
    container for gradients and momentum buffers.
    """

    layers: list

    def __post_init__(self):
        self.layers = [(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
                       for w, b in self.layers]
        for i, (w, b) in enumerate(self.layers):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: weight {w.shape} and bias {b.shape} do not agree")
            if i and w.shape[1] != self.layers[i - 1][0].shape[0]:
                raise ValueError(
                    f"layer {i} expects {w.shape[1]} inputs but layer {i - 1} "
                    f"emits {self.layers[i - 1][0].shape[0]}"
                )

    @property
    def layer_sizes(self):
        return [self.layers[0][0].shape[1]] + [w.shape[0] for w, _ in self.layers]

    @property
    def total_dim(self):
        return sum(w.size + b.size for w, b in self.layers)

    def flat(self):
        return np.concatenate([a.ravel() for w, b in self.layers for a in (w, b)])

    @classmethod
    def from_flat(cls, layer_sizes, vector):
        vector = np.asarray(vector, dtype=np.float64)
        layers, pos = [], 0
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            w = vector[pos:pos + n_in * n_out].reshape(n_out, n_in)
            pos += n_in * n_out
            b = vector[pos:pos + n_out]
            pos += n_out
            layers.append((w.copy(), b.copy()))
        if pos != vector.size:
            raise ValueError(f"expected {pos} parameters for {layer_sizes}, got {vector.size}")
        return cls(layers)

    def zeros_like(self):
        return ParameterSet([(np.zeros_like(w), np.zeros_like(b)) for w, b in self.layers])

    def copy(self):
        return ParameterSet([(w.copy(), b.copy()) for w, b in self.layers])

    def same_shape(self, other):
        return len(self.layers) == len(other.layers) and all(
            w.shape == v.shape and b.shape == c.shape
            for (w, b), (v, c) in zip(self.layers, other.layers)
        )

    def is_finite(self):
        return all(np.isfinite(w).all() and np.isfinite(b).all() for w, b in self.layers)


GradientSet = ParameterSet


def init_params(layer_sizes, seed):
    """He-normal weights (variance 2/fan_in), zero biases."""
    layer_sizes = [int(s) for s in layer_sizes]
    if len(layer_sizes) < 2:
        raise ValueError(f"need at least an input and an output size, got {layer_sizes}")
    if any(s <= 0 for s in layer_sizes):
        raise ValueError(f"layer sizes must be positive, got {layer_sizes}")
    rng = np.random.default_rng(seed)
    layers = []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w = rng.standard_normal((n_out, n_in)) * np.sqrt(2.0 / n_in)
        layers.append((w, np.zeros(n_out)))
    return ParameterSet(layers)


def _forward(layers, x):
    h = x
    penultimate = x
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        z = h @ w.T + b
        if i == last:
            return z, penultimate
        h = relu(z)
        penultimate = h
    raise AssertionError("unreachable")


def _check_input(params, batch):
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ValueError(f"batch must be 2-D, got shape {batch.shape}")
    d = params.layer_sizes[0]
    if batch.shape[1] != d:
        raise ValueError(f"batch has {batch.shape[1]} features but the network expects {d}")
    return batch


def forward(params, batch):
    """Return ``(logits, penultimate)`` for a batch of feature rows.

    Hidden layers are ReLU; the output layer is affine. ``penultimate`` is the
    last hidden activation (the input itself for a single-layer network).
    """
    batch = _check_input(params, batch)
    if len(params.layers) == 1:
        w, b = params.layers[0]
        return batch @ w.T + b, batch
    h = batch
    for w, b in params.layers[:-1]:
        h = np.maximum(h @ w.T + b, 0.0)
    w, b = params.layers[-1]
    return h @ w.T + b, h


def grad_of_loss(params, loss_fn: Callable[[Tensor], Tensor], batch):
    """Evaluate ``loss_fn(logits)`` and its gradient with respect to every parameter.

    ``loss_fn`` receives the logits as a :class:`Tensor` and must return a
    scalar Tensor built from autodiff operations.
    """
    batch = _check_input(params, batch)
    leaves = [(Tensor(w, requires_grad=True), Tensor(b, requires_grad=True))
              for w, b in params.layers]
    logits, _ = _forward(leaves, Tensor(batch))
    if not np.isfinite(logits.data).all():
        raise NonFiniteError("forward", "logits")
    loss = loss_fn(logits)
    if not isinstance(loss, Tensor):
        raise TypeError("loss_fn must return a Tensor")
    value = loss.item()
    if not np.isfinite(value):
        raise NonFiniteError("loss", repr(value))
    loss.backward()
    grads = []
    for w, b in leaves:
        gw = w.grad if w.grad is not None else np.zeros_like(w.data)
        gb = b.grad if b.grad is not None else np.zeros_like(b.data)
        grads.append((gw, gb))
    grads = GradientSet(grads)
    if not grads.is_finite():
        raise NonFiniteError("backward", "gradient")
    return value, grads


def sgd_step(params, grads, lr, momentum_state, momentum=0.9, weight_decay=0.0):
    """One SGD step with heavy-ball momentum and L2 weight decay.

    v' = momentum * v + (grad + weight_decay * theta);  theta' = theta - lr * v'
    Returns new ``(params, momentum_state)``; inputs are not modified.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if momentum_state is None:
        momentum_state = params.zeros_like()
    if not (params.same_shape(grads) and params.same_shape(momentum_state)):
        raise ValueError("params, grads and momentum state have different shapes")
    new_params, new_state = [], []
    for (w, b), (gw, gb), (vw, vb) in zip(params.layers, grads.layers, momentum_state.layers):
        vw = momentum * vw + (gw + weight_decay * w)
        vb = momentum * vb + (gb + weight_decay * b)
        new_params.append((w - lr * vw, b - lr * vb))
        new_state.append((vw, vb))
    return ParameterSet(new_params), ParameterSet(new_state)


def learning_rate(epoch, lr0, decay_epochs, factor):
    """Step schedule: ``lr0 * factor ** (number of decay epochs <= epoch)``."""
    return lr0 * factor ** sum(1 for e in decay_epochs if e <= epoch)
