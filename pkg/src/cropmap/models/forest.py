"""Random forest: bagged CART trees with Gini splits, grown to purity.

Trees are stored as flat numpy arrays (feature, threshold, children, leaf
counts) so forests serialize into the common artifact format and predict
without recursion.  Split search is vectorized: the sampled feature columns
are argsorted once per node and Gini is evaluated for every candidate
threshold from prefix class counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import N_CLASSES, LabeledDataset
from ..errors import EmptyTrainSet, ShapeMismatch
from .config import ModelConfig


@dataclass
class Tree:
    feature: np.ndarray  # (nodes,) int64, -1 at leaves
    threshold: np.ndarray  # (nodes,) float64
    left: np.ndarray  # (nodes,) int64
    right: np.ndarray  # (nodes,) int64
    counts: np.ndarray  # (nodes, n_classes) float64 class counts


@dataclass
class RandomForest:
    trees: list
    n_features: int
    n_classes: int = N_CLASSES


def _best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray, n_classes: int):
    """Lowest weighted-Gini split over the given feature columns.

    Returns (feature, threshold) or None when no column admits a split.
    Ties resolve to the first feature in iteration order, then the lowest
    threshold, via strict comparison.
    """
    m = y.size
    best = (np.inf, -1, 0.0)
    onehot = np.equal.outer(y, np.arange(n_classes)).astype(np.float64)
    total = onehot.sum(axis=0)
    for f in features:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        v = col[order]
        cum = np.cumsum(onehot[order], axis=0)
        # candidate split after position i requires a strict value increase
        cuts = np.flatnonzero(v[:-1] < v[1:])
        if cuts.size == 0:
            continue
        nl = (cuts + 1).astype(np.float64)
        nr = m - nl
        left_counts = cum[cuts]
        right_counts = total - left_counts
        gini_l = 1.0 - ((left_counts / nl[:, None]) ** 2).sum(axis=1)
        gini_r = 1.0 - ((right_counts / nr[:, None]) ** 2).sum(axis=1)
        weighted = (nl * gini_l + nr * gini_r) / m
        j = int(np.argmin(weighted))
        if weighted[j] < best[0]:
            best = (weighted[j], int(f), 0.5 * (v[cuts[j]] + v[cuts[j] + 1]))
    if best[1] < 0:
        return None
    return best[1], best[2]


def _grow_tree(X: np.ndarray, y: np.ndarray, max_features: int, n_classes: int, rng: np.random.Generator) -> Tree:
    n_feat = X.shape[1]
    k = min(max_features, n_feat)
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[np.ndarray] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.zeros(n_classes))
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(y.size))]
    while stack:
        node, idx = stack.pop()
        ys = y[idx]
        cnt = np.bincount(ys, minlength=n_classes).astype(np.float64)
        counts[node] = cnt
        if idx.size < 2 or cnt.max() == idx.size:
            continue
        chosen = rng.choice(n_feat, size=k, replace=False)
        split = _best_split(X[idx], ys, chosen, n_classes)
        if split is None:
            continue
        f, thr = split
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        ln = new_node()
        rn = new_node()
        left[node] = ln
        right[node] = rn
        stack.append((rn, idx[~go_left]))
        stack.append((ln, idx[go_left]))
    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        counts=np.stack(counts),
    )


def _flatten(X: np.ndarray) -> np.ndarray:
    if X.ndim == 3:
        return X.reshape(X.shape[0], -1)
    if X.ndim == 2:
        return X
    raise ShapeMismatch(f"expected (n, steps, channels) or (n, features), got {X.shape}")


def rf_train(data: LabeledDataset, cfg: ModelConfig) -> RandomForest:
    """Bagging: each tree sees a bootstrap resample of the full training set
    and searches max_features random features per node."""
    if len(data) == 0:
        raise EmptyTrainSet("random forest needs a non-empty training set")
    X = _flatten(data.X)
    y = data.y
    n = y.size
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_estimators)
    trees = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X[boot], y[boot], cfg.max_features, N_CLASSES, rng))
    return RandomForest(trees=trees, n_features=X.shape[1])


def _tree_votes(tree: Tree, X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    while True:
        feat = tree.feature[node]
        active = feat >= 0
        if not active.any():
            break
        r = rows[active]
        f = feat[active]
        go_left = X[r, f] <= tree.threshold[node[active]]
        node[r] = np.where(go_left, tree.left[node[r]], tree.right[node[r]])
    # ties inside a leaf resolve to the lowest class index via argmax
    return np.argmax(tree.counts[node], axis=1)


def rf_predict(forest: RandomForest, X: np.ndarray, return_confidence: bool = False):
    """Majority vote over trees; ties break to the lowest class index."""
    X = _flatten(np.asarray(X, dtype=np.float64))
    if X.shape[1] != forest.n_features:
        raise ShapeMismatch(f"expected {forest.n_features} features, got {X.shape[1]}")
    votes = np.zeros((X.shape[0], forest.n_classes), dtype=np.int64)
    for tree in forest.trees:
        pred = _tree_votes(tree, X)
        votes[np.arange(X.shape[0]), pred] += 1
    labels = np.argmax(votes, axis=1)
    if return_confidence:
        conf = votes[np.arange(X.shape[0]), labels] / len(forest.trees)
        return labels, conf
    return labels


def forest_to_arrays(forest: RandomForest) -> dict:
    """Pack a forest into named arrays for the artifact container."""
    sizes = np.array([t.feature.size for t in forest.trees], dtype=np.int64)
    return {
        "tree_sizes": sizes,
        "feature": np.concatenate([t.feature for t in forest.trees]),
        "threshold": np.concatenate([t.threshold for t in forest.trees]),
        "left": np.concatenate([t.left for t in forest.trees]),
        "right": np.concatenate([t.right for t in forest.trees]),
        "counts": np.concatenate([t.counts for t in forest.trees], axis=0),
        "n_features": np.array([forest.n_features], dtype=np.int64),
    }


def forest_from_arrays(arrays: dict) -> RandomForest:
    sizes = arrays["tree_sizes"].astype(np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    trees = []
    for i in range(sizes.size):
        a, b = offsets[i], offsets[i + 1]
        trees.append(
            Tree(
                feature=arrays["feature"][a:b].astype(np.int64),
                threshold=arrays["threshold"][a:b].astype(np.float64),
                left=arrays["left"][a:b].astype(np.int64),
                right=arrays["right"][a:b].astype(np.int64),
                counts=arrays["counts"][a:b].astype(np.float64),
            )
        )
    return RandomForest(trees=trees, n_features=int(arrays["n_features"][0]))
