"""Feed-forward network for the binary risk model.

Architecture is fixed by design: three hidden layers of 20 (ReLU), 30
(tanh), and 30 (tanh) units into a 2-way softmax. Training is plain
mini-batch gradient descent on cross-entropy in float64, with inputs
z-scored per column (the scaler is part of the model). Everything is
deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, DomainError, TrainingError

HIDDEN_SIZES = (20, 30, 30)
ACTIVATIONS = ("relu", "tanh", "tanh")
N_CLASSES = 2


@dataclass
class MlpConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    # relative per-epoch loss increase tolerated before the monotone-descent
    # property is considered violated (recorded for the property tests)
    loss_increase_tol: float = 1e-3


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    return relu(z) if name == "relu" else np.tanh(z)


def _activate_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(float)
    return 1.0 - a * a


@dataclass
class MlpModel:
    weights: list  # list of (in, out) float64 matrices
    biases: list
    mean: np.ndarray
    std: np.ndarray
    config: MlpConfig
    columns: list
    loss_curve: list = field(default_factory=list)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


def init_params(d_in: int, seed: int):
    """Glorot-uniform weights from a Philox stream keyed by (seed, layer)."""
    sizes = [d_in, *HIDDEN_SIZES, N_CLASSES]
    weights, biases = [], []
    for layer in range(len(sizes) - 1):
        rng = np.random.Generator(np.random.Philox(key=np.array(
            [seed & (2**64 - 1), 10_000 + layer], dtype=np.uint64)))
        fan_in, fan_out = sizes[layer], sizes[layer + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward(weights, biases, X: np.ndarray):
    """Returns (probabilities, per-layer preactivations, activations)."""
    zs, activations = [], [X]
    a = X
    for i, name in enumerate(ACTIVATIONS):
        z = a @ weights[i] + biases[i]
        a = _activate(name, z)
        zs.append(z)
        activations.append(a)
    z_out = a @ weights[-1] + biases[-1]
    zs.append(z_out)
    probs = softmax(z_out)
    activations.append(probs)
    return probs, zs, activations


def cross_entropy(probs: np.ndarray, y: np.ndarray) -> float:
    eps = 1e-12
    return float(-np.mean(np.log(probs[np.arange(len(y)), y] + eps)))


def gradients(weights, biases, X: np.ndarray, y: np.ndarray):
    """Analytic gradients of the mean cross-entropy on the batch."""
    n = len(y)
    probs, zs, activations = forward(weights, biases, X)
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), y] = 1.0
    delta = (probs - onehot) / n  # softmax + cross-entropy
    grads_w = [None] * len(weights)
    grads_b = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            name = ACTIVATIONS[layer - 1]
            delta = (delta @ weights[layer].T) * _activate_grad(
                name, zs[layer - 1], activations[layer])
    loss = cross_entropy(probs, y)
    return loss, grads_w, grads_b


def train_mlp(X: np.ndarray, y: np.ndarray, cfg: MlpConfig,
              columns: list[str] | None = None) -> MlpModel:
    """Mini-batch gradient descent; loss recorded on the full training set
    after every epoch. Raises DivergenceError on a non-finite loss."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y):
        raise DomainError("X must be 2-D with one label per row")
    if len(np.unique(y)) < 2:
        raise TrainingError("training data contains a single class")
    if columns is None:
        columns = [f"f{j}" for j in range(X.shape[1])]

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)  # constant columns pass through as 0
    Xs = (X - mean) / std

    weights, biases = init_params(X.shape[1], cfg.seed)
    order_rng = np.random.Generator(np.random.Philox(key=np.array(
        [cfg.seed & (2**64 - 1), 20_000], dtype=np.uint64)))

    n = len(y)
    losses = []
    # overflow inside the matmuls surfaces as a non-finite loss below, so
    # the raw numpy warnings are just noise here
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            perm = order_rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                batch = perm[start:start + cfg.batch_size]
                _, gw, gb = gradients(weights, biases, Xs[batch], y[batch])
                for i in range(len(weights)):
                    weights[i] -= cfg.learning_rate * gw[i]
                    biases[i] -= cfg.learning_rate * gb[i]
            probs, _, _ = forward(weights, biases, Xs)
            loss = cross_entropy(probs, y)
            if not np.isfinite(loss):
                raise DivergenceError(epoch, cfg.learning_rate)
            losses.append(loss)

    return MlpModel(
        weights=weights,
        biases=biases,
        mean=mean,
        std=std,
        config=cfg,
        columns=list(columns),
        loss_curve=losses,
    )


def predict_proba(model: MlpModel, X: np.ndarray) -> np.ndarray:
    """Positive-class probabilities."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.weights[0].shape[0]:
        from .errors import EncodingMismatchError
        raise EncodingMismatchError(
            f"expected {model.weights[0].shape[0]} features, got {X.shape[1]}")
    probs, _, _ = forward(model.weights, model.biases, model.standardize(X))
    return probs[:, 1]


def predict_label(model: MlpModel, X: np.ndarray) -> np.ndarray:
    return (predict_proba(model, X) > 0.5).astype(int)
