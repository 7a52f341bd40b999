"""Stratified k-fold cross-validation and confusion metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forest as forest_mod
from . import mlp as mlp_mod
from .errors import DomainError
from .rng import derive_seed


@dataclass(frozen=True)
class FoldMetrics:
    fold: int
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def accuracy(self) -> float:
        total = self.tp + self.fp + self.tn + self.fn
        return (self.tp + self.tn) / total if total else float("nan")

    @property
    def sensitivity(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else float("nan")

    @property
    def specificity(self) -> float:
        denom = self.tn + self.fp
        return self.tn / denom if denom else float("nan")

    def to_dict(self) -> dict:
        return {
            "fold": self.fold,
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
        }


@dataclass(frozen=True)
class EvalReport:
    folds: tuple
    pooled: FoldMetrics

    def to_dict(self) -> dict:
        return {
            "folds": [f.to_dict() for f in self.folds],
            "pooled": self.pooled.to_dict(),
        }


def confusion(y_true: np.ndarray, y_pred: np.ndarray, fold: int = -1) -> FoldMetrics:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    return FoldMetrics(
        fold=fold,
        tp=int(np.sum((y_true == 1) & (y_pred == 1))),
        fp=int(np.sum((y_true == 0) & (y_pred == 1))),
        tn=int(np.sum((y_true == 0) & (y_pred == 0))),
        fn=int(np.sum((y_true == 1) & (y_pred == 0))),
    )


def stratified_folds(y: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Disjoint, exhaustive folds with per-fold class balance within one of
    the ideal split. Per class, indices are shuffled by a Philox stream
    keyed by (seed, class) and dealt round-robin."""
    y = np.asarray(y, dtype=int)
    classes = np.unique(y)
    if k < 2:
        raise DomainError("k must be >= 2")
    min_count = min(int(np.sum(y == c)) for c in classes)
    if k > min_count:
        raise DomainError(f"k={k} exceeds the smallest class count {min_count}")
    folds: list[list[int]] = [[] for _ in range(k)]
    for c in classes:
        rng = np.random.Generator(np.random.Philox(key=np.array(
            [seed & (2**64 - 1), 30_000 + int(c)], dtype=np.uint64)))
        idx = np.nonzero(y == c)[0]
        idx = idx[rng.permutation(len(idx))]
        for pos, row in enumerate(idx):
            folds[pos % k].append(int(row))
    return [np.array(sorted(f), dtype=int) for f in folds]


def cross_validate(X: np.ndarray, y: np.ndarray, train_fn, k: int = 10,
                   seed: int = 0) -> EvalReport:
    """Every row is predicted exactly once, by a model that never saw it.

    ``train_fn(X_train, y_train, fold_seed) -> predict`` where ``predict``
    maps a feature matrix to 0/1 labels.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    folds = stratified_folds(y, k, seed)
    metrics = []
    for i, test_idx in enumerate(folds):
        mask = np.ones(len(y), dtype=bool)
        mask[test_idx] = False
        predict = train_fn(X[mask], y[mask], derive_seed(seed, i))
        y_pred = predict(X[test_idx])
        metrics.append(confusion(y[test_idx], y_pred, fold=i))
    pooled = FoldMetrics(
        fold=-1,
        tp=sum(m.tp for m in metrics),
        fp=sum(m.fp for m in metrics),
        tn=sum(m.tn for m in metrics),
        fn=sum(m.fn for m in metrics),
    )
    return EvalReport(folds=tuple(metrics), pooled=pooled)


def forest_trainer(cfg: forest_mod.ForestConfig):
    def train(X, y, fold_seed):
        fold_cfg = forest_mod.ForestConfig(
            n_trees=cfg.n_trees,
            max_depth=cfg.max_depth,
            min_leaf=cfg.min_leaf,
            features_per_split=cfg.features_per_split,
            seed=fold_seed,
        )
        model = forest_mod.train_forest(X, y, fold_cfg)
        return lambda Xt: forest_mod.predict_label(model, Xt)
    return train


def mlp_trainer(cfg: mlp_mod.MlpConfig):
    def train(X, y, fold_seed):
        fold_cfg = mlp_mod.MlpConfig(
            learning_rate=cfg.learning_rate,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            seed=fold_seed,
            loss_increase_tol=cfg.loss_increase_tol,
        )
        model = mlp_mod.train_mlp(X, y, fold_cfg)
        return lambda Xt: mlp_mod.predict_label(model, Xt)
    return train
