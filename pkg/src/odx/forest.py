"""Random forest binary classifier built from scratch.

Trees grow on bootstrap samples with Gini-impurity splits over a random
feature subset per node. Every tree owns a counter-based Philox stream
keyed by (seed, tree index), so serial and parallel training produce the
same forest and a forest of n trees is a prefix of one with n+1.

Risk scores are the mean of the per-tree votes; their 95% interval comes
from a percentile bootstrap over the vote set (B=1000), with the resample
index stream generated by the portable xoshiro protocol so an independent
implementation can reproduce the interval exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, EncodingMismatchError, TrainingError
from .rng import Xoshiro256StarStar

BOOTSTRAP_REPLICATES = 1000


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int | None = None  # default: round(sqrt(d))
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise DomainError("n_trees must be >= 1")


@dataclass
class TreeNodes:
    """Flat node arrays; children of -1 mark leaves."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    count_neg: list[int] = field(default_factory=list)
    count_pos: list[int] = field(default_factory=list)

    def add(self, count_neg: int, count_pos: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.count_neg.append(count_neg)
        self.count_pos.append(count_pos)
        return len(self.feature) - 1

    def leaf_fraction(self, node: int) -> float:
        pos = self.count_pos[node]
        neg = self.count_neg[node]
        return pos / (pos + neg)

    def apply(self, x: np.ndarray) -> int:
        node = 0
        while self.left[node] != -1:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return node


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return 1.0 - float(np.sum(p * p))


def _best_split(X: np.ndarray, y: np.ndarray, feature_order: np.ndarray,
                min_leaf: int):
    """Best (feature, threshold, gain) over the drawn features.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Features are scanned in drawn order and thresholds ascending;
    a strictly better gain wins, so ties resolve to the earliest candidate.
    """
    n = len(y)
    total_pos = float(np.sum(y == 1))
    parent_counts = np.array([n - total_pos, total_pos], dtype=float)
    parent_imp = _gini(parent_counts)
    best = (None, 0.0, 0.0)  # feature, threshold, gain
    for f in feature_order:
        values = X[:, f]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        cum_pos = np.cumsum(y[order])
        distinct = np.nonzero(sv[1:] > sv[:-1])[0]  # split after index i
        if len(distinct) == 0:
            continue
        n_left = (distinct + 1).astype(float)
        n_right = n - n_left
        ok = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not ok.any():
            continue
        pos_left = cum_pos[distinct].astype(float)
        pos_right = total_pos - pos_left
        # weighted child Gini: (n_l * g_l + n_r * g_r) / n with
        # g = 1 - (pos^2 + neg^2) / m^2
        g_left = 1.0 - (pos_left**2 + (n_left - pos_left)**2) / n_left**2
        g_right = 1.0 - (pos_right**2 + (n_right - pos_right)**2) / n_right**2
        gain = parent_imp - (n_left * g_left + n_right * g_right) / n
        gain[~ok] = -np.inf
        i_best = int(np.argmax(gain))  # first maximum: lowest threshold wins ties
        if gain[i_best] > best[2]:
            i = distinct[i_best]
            threshold = (sv[i] + sv[i + 1]) / 2.0
            best = (int(f), float(threshold), float(gain[i_best]))
    return best


class DecisionTree:
    def __init__(self, nodes: TreeNodes):
        self.nodes = nodes

    @classmethod
    def grow(cls, X: np.ndarray, y: np.ndarray, rng: np.random.Generator,
             cfg: ForestConfig, n_total: int,
             importance_acc: np.ndarray) -> "DecisionTree":
        d = X.shape[1]
        m = cfg.features_per_split or max(1, round(math.sqrt(d)))
        m = min(m, d)
        nodes = TreeNodes()

        # explicit stack, left child first, so depth is unbounded by the
        # interpreter's recursion limit; (parent, is_left) = (-1, _) is root
        stack = [(np.arange(len(y)), 0, -1, False)]
        while stack:
            idx, depth, parent, is_left = stack.pop()
            ys = y[idx]
            pos = int(ys.sum())
            neg = len(ys) - pos
            node = nodes.add(neg, pos)
            if parent >= 0:
                if is_left:
                    nodes.left[parent] = node
                else:
                    nodes.right[parent] = node
            if pos == 0 or neg == 0:
                continue
            if cfg.max_depth is not None and depth >= cfg.max_depth:
                continue
            if len(idx) < 2 * cfg.min_leaf or len(idx) < 2:
                continue
            feature_order = rng.permutation(d)[:m]
            f, thr, gain = _best_split(X[idx], ys, feature_order, cfg.min_leaf)
            if f is None or gain <= 0.0:
                continue
            importance_acc[f] += (len(idx) / n_total) * gain
            nodes.feature[node] = f
            nodes.threshold[node] = thr
            mask = X[idx, f] <= thr
            stack.append((idx[~mask], depth + 1, node, False))
            stack.append((idx[mask], depth + 1, node, True))
        return cls(nodes)

    def vote(self, x: np.ndarray) -> float:
        """1.0/0.0 by leaf majority; exact ties count 0.5."""
        node = self.nodes.apply(x)
        frac = self.nodes.leaf_fraction(node)
        if frac > 0.5:
            return 1.0
        if frac < 0.5:
            return 0.0
        return 0.5


class RandomForest:
    def __init__(self, config: ForestConfig, trees: list[DecisionTree],
                 columns: list[str], importance_raw: np.ndarray):
        self.config = config
        self.trees = trees
        self.columns = columns
        self._importance_raw = importance_raw

    @property
    def n_features(self) -> int:
        return len(self.columns)


def train_forest(X: np.ndarray, y: np.ndarray, cfg: ForestConfig,
                 columns: list[str] | None = None) -> RandomForest:
    """Fit the forest; deterministic given (X, y, cfg.seed)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y):
        raise DomainError("X must be 2-D with one label per row")
    if len(X) < 2:
        raise TrainingError("need at least 2 rows")
    if len(np.unique(y)) < 2:
        raise TrainingError("training data contains a single class")
    if columns is None:
        columns = [f"f{j}" for j in range(X.shape[1])]

    n, d = X.shape
    importance_acc = np.zeros(d)
    trees = []
    for t in range(cfg.n_trees):
        rng = np.random.Generator(np.random.Philox(key=np.array(
            [cfg.seed & (2**64 - 1), t], dtype=np.uint64)))
        boot = rng.integers(0, n, size=n)
        tree = DecisionTree.grow(X[boot], y[boot], rng, cfg, n, importance_acc)
        trees.append(tree)
    return RandomForest(cfg, trees, list(columns), importance_acc)


def votes(forest: RandomForest, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (forest.n_features,):
        raise EncodingMismatchError(
            f"expected {forest.n_features} features, got {x.shape}")
    return np.array([t.vote(x) for t in forest.trees])


def predict_proba(forest: RandomForest, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.array([votes(forest, row).mean() for row in X])


def predict_label(forest: RandomForest, X: np.ndarray) -> np.ndarray:
    """1 where the vote share exceeds 0.5 (exact ties go to 0)."""
    return (predict_proba(forest, X) > 0.5).astype(int)


def feature_importances(forest: RandomForest) -> np.ndarray:
    """Mean decrease in Gini impurity, normalized to sum to one.

    A forest that never split (pathological inputs) reports the uniform
    vector so the sum-to-one contract still holds.
    """
    raw = forest._importance_raw
    total = raw.sum()
    if total <= 0:
        return np.full(len(raw), 1.0 / len(raw))
    return raw / total


def grouped_importances(forest: RandomForest) -> dict[str, float]:
    """Importances with one-hot indicator columns folded into their parent
    categorical (columns named like "race=White" group under "race")."""
    shares = feature_importances(forest)
    out: dict[str, float] = {}
    for name, share in zip(forest.columns, shares):
        group = name.split("=")[0]
        out[group] = out.get(group, 0.0) + float(share)
    return out


@dataclass(frozen=True)
class RiskScore:
    risk: float
    ci_low: float
    ci_high: float
    importances: dict | None = None

    def to_dict(self) -> dict:
        return {
            "risk": self.risk,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "importances": self.importances,
        }


def percentile(sorted_values: np.ndarray, q: float) -> float:
    """Linear-interpolation percentile (q in [0, 1]) on pre-sorted values."""
    n = len(sorted_values)
    if n == 1:
        return float(sorted_values[0])
    pos = q * (n - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return float(sorted_values[lo] * (1 - frac) + sorted_values[hi] * frac)


@lru_cache(maxsize=8)
def _bootstrap_indices(seed: int, n_votes: int, replicates: int) -> np.ndarray:
    """Resample index matrix via the portable xoshiro protocol.

    Row b holds the b-th replicate's indices, drawn in order with
    randbelow(n_votes). Cached: the matrix depends only on (seed, sizes),
    which keeps interactive prediction inside its latency budget.
    """
    rng = Xoshiro256StarStar(seed)
    flat = [rng.randbelow(n_votes) for _ in range(replicates * n_votes)]
    return np.array(flat, dtype=np.int64).reshape(replicates, n_votes)


def bootstrap_interval(vote_values: np.ndarray, seed: int,
                       replicates: int = BOOTSTRAP_REPLICATES) -> tuple[float, float]:
    idx = _bootstrap_indices(seed, len(vote_values), replicates)
    means = vote_values[idx].mean(axis=1)
    means.sort()
    return percentile(means, 0.025), percentile(means, 0.975)


def predict_risk(forest: RandomForest, x: np.ndarray, seed: int = 0,
                 replicates: int = BOOTSTRAP_REPLICATES) -> RiskScore:
    """Risk = mean per-tree vote; 95% interval by percentile bootstrap over
    the vote set. The interval is widened to include the point estimate in
    the rare resampling corner where a quantile lands inside it."""
    v = votes(forest, x)
    risk = float(v.mean())
    lo, hi = bootstrap_interval(v, seed, replicates)
    return RiskScore(
        risk=risk,
        ci_low=min(lo, risk),
        ci_high=max(hi, risk),
        importances=grouped_importances(forest),
    )
