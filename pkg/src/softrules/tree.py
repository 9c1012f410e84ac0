"""Least-squares regression trees on row subsamples with a restricted feature set.

Axis-aligned binary splits, thresholds at midpoints of adjacent distinct
values; rows with value equal to the threshold route left. Ties between
candidate splits break toward the lowest feature index, then the smallest
threshold, so identical inputs always grow identical trees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset

# Reductions smaller than this (relative to parent SSE) do not count as
# progress; guards against accepting float noise on pure nodes.
_SSE_EPS = 1e-12


@dataclass
class TreeNode:
    node_id: int
    depth: int
    train_count: int
    prediction: float
    split_feature: int | None = None
    threshold: float = float("nan")
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.split_feature is None


@dataclass
class RegressionTree:
    nodes: list[TreeNode]
    allowed_features: tuple[int, ...]
    max_depth: int
    root: int = 0

    def predict(self, x) -> float:
        return predict_tree(self, x)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        """Vectorized routing of an (m, p) matrix to leaf predictions."""
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            nid, idx = stack.pop()
            node = self.nodes[nid]
            if node.is_leaf:
                out[idx] = node.prediction
            else:
                goes_left = X[idx, node.split_feature] <= node.threshold
                stack.append((node.left, idx[goes_left]))
                stack.append((node.right, idx[~goes_left]))
        return out

    def leaf_ids(self) -> list[int]:
        return [n.node_id for n in self.nodes if n.is_leaf]


def best_split(values: np.ndarray, targets: np.ndarray, min_leaf: int):
    """Best SSE-reducing threshold for one column, or None.

    Thresholds are midpoints of adjacent distinct sorted values; both sides
    must keep at least min_leaf rows. Returns (threshold, sse_reduction).
    """
    values = np.asarray(values, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    m = values.shape[0]
    if m < 2 or m < 2 * min_leaf:
        return None
    order = np.argsort(values, kind="stable")
    v = values[order]
    t = targets[order]
    if v[0] == v[-1]:
        return None
    csum = np.cumsum(t)
    csq = np.cumsum(t * t)
    total, total_sq = csum[-1], csq[-1]
    parent = max(total_sq - total * total / m, 0.0)

    left_n = np.arange(1, m)
    right_n = m - left_n
    ls, lq = csum[:-1], csq[:-1]
    left_sse = lq - ls * ls / left_n
    right_sse = (total_sq - lq) - (total - ls) ** 2 / right_n
    reduction = parent - left_sse - right_sse
    legal = (v[1:] != v[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
    if not legal.any():
        return None
    reduction[~legal] = -np.inf
    j = int(np.argmax(reduction))  # first max -> smallest threshold on ties
    if reduction[j] <= _SSE_EPS * (parent + 1.0):
        return None
    return (v[j] + v[j + 1]) / 2.0, float(reduction[j])


def fit_tree(
    dataset: Dataset,
    row_idx,
    allowed_features,
    max_depth: int,
    min_leaf: int = 5,
    targets_override: np.ndarray | None = None,
) -> RegressionTree:
    """Greedy top-down induction minimizing within-node SSE.

    Splitting stops when a node is pure, at max_depth, holds fewer than
    2*min_leaf rows, or no split reduces SSE. targets_override (full-length
    vector) substitutes for dataset.target, e.g. to fit residuals.
    """
    rows = np.asarray(row_idx, dtype=np.intp)
    feats = np.unique(np.asarray(allowed_features, dtype=np.intp))
    if rows.size == 0:
        raise ValueError("row_idx is empty")
    if feats.size == 0:
        raise ValueError("allowed_features is empty")
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    X = dataset.features
    y = dataset.target if targets_override is None else np.asarray(targets_override, dtype=np.float64)

    nodes: list[TreeNode] = []

    def build(idx: np.ndarray, depth: int) -> int:
        node_id = len(nodes)
        node = TreeNode(node_id, depth, int(idx.size), float(np.mean(y[idx])))
        nodes.append(node)
        if depth < max_depth and idx.size >= 2 * min_leaf:
            best = None  # (reduction, feature, threshold)
            for f in feats:
                found = best_split(X[idx, f], y[idx], min_leaf)
                if found is not None and (best is None or found[1] > best[0]):
                    best = (found[1], int(f), found[0])
            if best is not None:
                _, f, thr = best
                node.split_feature = f
                node.threshold = thr
                goes_left = X[idx, f] <= thr
                node.left = build(idx[goes_left], depth + 1)
                node.right = build(idx[~goes_left], depth + 1)
        return node_id

    build(rows, 0)
    return RegressionTree(nodes, tuple(int(f) for f in feats), max_depth)


def predict_tree(tree: RegressionTree, x) -> float:
    """Route a single feature vector to its leaf mean."""
    x = np.asarray(x, dtype=np.float64)
    node = tree.nodes[tree.root]
    while not node.is_leaf:
        node = tree.nodes[node.left if x[node.split_feature] <= node.threshold else node.right]
    return node.prediction
