"""Network forward/backward correctness and training behavior."""

import numpy as np
import pytest

from odx.errors import DivergenceError, TrainingError
from odx.mlp import (
    HIDDEN_SIZES,
    MlpConfig,
    cross_entropy,
    forward,
    gradients,
    init_params,
    predict_label,
    predict_proba,
    softmax,
    train_mlp,
)


def zero_params(d_in):
    weights, biases = init_params(d_in, seed=0)
    return [np.zeros_like(w) for w in weights], [np.zeros_like(b) for b in biases]


class TestForward:
    def test_zero_weights_give_symmetric_softmax(self):
        weights, biases = zero_params(4)
        probs, _, _ = forward(weights, biases, np.ones((3, 4)))
        assert np.allclose(probs, 0.5)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        z = rng.normal(scale=50, size=(200, 2))
        p = softmax(z)
        assert np.allclose(p.sum(axis=1), 1.0)
        assert np.all(p > 0)

    def test_architecture_is_20_30_30(self):
        weights, _ = init_params(7, seed=1)
        assert [w.shape for w in weights] == [(7, 20), (20, 30), (30, 30), (30, 2)]
        assert HIDDEN_SIZES == (20, 30, 30)


class TestGradients:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_analytic_matches_central_differences(self, seed):
        # exercises ReLU, both tanh layers, and the softmax/cross-entropy
        # head on a random 5-sample batch in float64
        rng = np.random.default_rng(seed)
        d = 6
        X = rng.normal(size=(5, d))
        y = rng.integers(0, 2, size=5)
        weights, biases = init_params(d, seed=seed + 10)

        _, gw, gb = gradients(weights, biases, X, y)

        h = 1e-6
        max_rel = 0.0

        def loss_at():
            probs, _, _ = forward(weights, biases, X)
            return cross_entropy(probs, y)

        for layer in range(len(weights)):
            w = weights[layer]
            flat = w.ravel()
            idx = rng.choice(flat.size, size=min(40, flat.size), replace=False)
            for k in idx:
                orig = flat[k]
                flat[k] = orig + h
                up = loss_at()
                flat[k] = orig - h
                down = loss_at()
                flat[k] = orig
                fd = (up - down) / (2 * h)
                a = gw[layer].ravel()[k]
                rel = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
                max_rel = max(max_rel, rel)
            b = biases[layer]
            for k in range(b.size):
                orig = b[k]
                b[k] = orig + h
                up = loss_at()
                b[k] = orig - h
                down = loss_at()
                b[k] = orig
                fd = (up - down) / (2 * h)
                a = gb[layer][k]
                rel = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
                max_rel = max(max_rel, rel)
        assert max_rel < 1e-4


def two_blob_data(n=60, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-1.0, 0.6, size=(n // 2, 3)),
                   rng.normal(1.0, 0.6, size=(n // 2, 3))])
    y = np.array([0] * (n // 2) + [1] * (n // 2))
    return X, y


class TestTraining:
    def test_learns_separable_blobs(self):
        X, y = two_blob_data()
        model = train_mlp(X, y, MlpConfig(epochs=80, seed=1))
        assert (predict_label(model, X) == y).mean() > 0.95

    def test_loss_nonincreasing_full_batch(self):
        # full-batch descent with a modest rate is monotone within the
        # recorded tolerance (minibatch runs may wobble; that knob is the
        # config's loss_increase_tol)
        X, y = two_blob_data()
        cfg = MlpConfig(learning_rate=0.05, epochs=120, batch_size=len(y), seed=2)
        model = train_mlp(X, y, cfg)
        tol = cfg.loss_increase_tol
        curve = model.loss_curve
        assert all(b <= a * (1 + tol) for a, b in zip(curve, curve[1:]))
        assert curve[-1] < curve[0]

    def test_divergence_reports_epoch_and_rate(self):
        # the first update overflows the output weights to inf, the next
        # forward pass mixes infinities into NaN logits, and the epoch loss
        # check trips (tanh saturation shrugs off merely-large rates)
        X, y = two_blob_data()
        with pytest.raises(DivergenceError) as err:
            train_mlp(X, y, MlpConfig(learning_rate=1e308, epochs=10, seed=3))
        assert err.value.learning_rate == 1e308
        assert err.value.epoch == 0

    def test_standardization_stored_and_applied(self):
        X, y = two_blob_data()
        X = np.column_stack([X, np.full(len(y), 7.0)])  # constant column
        model = train_mlp(X, y, MlpConfig(epochs=5, seed=4))
        assert np.allclose(model.mean[-1], 7.0)
        assert model.std[-1] == 1.0  # guarded, no division by zero
        z = model.standardize(X)
        assert np.allclose(z[:, -1], 0.0)
        assert np.allclose(z[:, 0].mean(), 0.0, atol=1e-12)

    def test_deterministic_given_seed(self):
        X, y = two_blob_data()
        a = train_mlp(X, y, MlpConfig(epochs=15, seed=5))
        b = train_mlp(X, y, MlpConfig(epochs=15, seed=5))
        assert all((wa == wb).all() for wa, wb in zip(a.weights, b.weights))
        assert a.loss_curve == b.loss_curve

    def test_single_class_raises(self):
        X, _ = two_blob_data()
        with pytest.raises(TrainingError):
            train_mlp(X, np.zeros(len(X), dtype=int), MlpConfig(seed=1))

    def test_probabilities_in_unit_interval(self):
        X, y = two_blob_data()
        model = train_mlp(X, y, MlpConfig(epochs=10, seed=6))
        p = predict_proba(model, X)
        assert np.all((p >= 0) & (p <= 1))
