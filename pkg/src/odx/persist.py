"""Model persistence as versioned JSON documents.

Forests serialize to flat node arrays, networks to dimension lists plus
row-major weight arrays and the input scaler. JSON float round-tripping is
exact for finite doubles, so a saved model reproduces its predictions
bit-for-bit after loading.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .forest import DecisionTree, ForestConfig, RandomForest, TreeNodes
from .mlp import MlpConfig, MlpModel

FORMAT_VERSION = 1


def forest_to_doc(model: RandomForest) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "forest",
        "config": {
            "n_trees": model.config.n_trees,
            "max_depth": model.config.max_depth,
            "min_leaf": model.config.min_leaf,
            "features_per_split": model.config.features_per_split,
            "seed": model.config.seed,
        },
        "columns": model.columns,
        "importance_raw": model._importance_raw.tolist(),
        "trees": [
            {
                "feature": t.nodes.feature,
                "threshold": t.nodes.threshold,
                "left": t.nodes.left,
                "right": t.nodes.right,
                "count_neg": t.nodes.count_neg,
                "count_pos": t.nodes.count_pos,
            }
            for t in model.trees
        ],
    }


def forest_from_doc(doc: dict) -> RandomForest:
    cfg = ForestConfig(**doc["config"])
    trees = []
    for td in doc["trees"]:
        nodes = TreeNodes(
            feature=list(td["feature"]),
            threshold=list(td["threshold"]),
            left=list(td["left"]),
            right=list(td["right"]),
            count_neg=list(td["count_neg"]),
            count_pos=list(td["count_pos"]),
        )
        trees.append(DecisionTree(nodes))
    return RandomForest(cfg, trees, list(doc["columns"]),
                        np.array(doc["importance_raw"], dtype=float))


def mlp_to_doc(model: MlpModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "mlp",
        "config": {
            "learning_rate": model.config.learning_rate,
            "epochs": model.config.epochs,
            "batch_size": model.config.batch_size,
            "seed": model.config.seed,
            "loss_increase_tol": model.config.loss_increase_tol,
        },
        "columns": model.columns,
        "layer_sizes": model.layer_sizes,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "mean": model.mean.tolist(),
        "std": model.std.tolist(),
        "loss_curve": model.loss_curve,
    }


def mlp_from_doc(doc: dict) -> MlpModel:
    return MlpModel(
        weights=[np.array(w, dtype=float) for w in doc["weights"]],
        biases=[np.array(b, dtype=float) for b in doc["biases"]],
        mean=np.array(doc["mean"], dtype=float),
        std=np.array(doc["std"], dtype=float),
        config=MlpConfig(**doc["config"]),
        columns=list(doc["columns"]),
        loss_curve=list(doc["loss_curve"]),
    )


def save_model(model, path) -> None:
    if isinstance(model, RandomForest):
        doc = forest_to_doc(model)
    elif isinstance(model, MlpModel):
        doc = mlp_to_doc(model)
    else:
        raise DataError(f"cannot persist object of type {type(model).__name__}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format version: {doc.get('format_version')}")
    kind = doc.get("kind")
    if kind == "forest":
        return forest_from_doc(doc)
    if kind == "mlp":
        return mlp_from_doc(doc)
    raise DataError(f"unknown model kind: {kind!r}")
