"""Ensemble generation by perturbation sampling with a memory parameter.

Each of M rounds draws a row subsample and a feature subsample from its own
seeded RNG stream, fits a least-squares tree to the current pseudo-targets
y - F_{j-1}(x), and line-searches a scalar coefficient for the new tree. The
running model F advances by memory * c_j * T_j, so memory = 0 yields
independent subsampled trees (the regime used everywhere downstream) and
memory = 1 yields boosting-like sequential fitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import parallel_map
from .data import Dataset
from .tree import RegressionTree, fit_tree, predict_tree


@dataclass(frozen=True)
class IsleConfig:
    num_trees: int = 400
    memory: float = 0.0
    row_fraction: float = 0.30
    feature_fraction: float = 0.10
    max_depth: int = 4
    min_leaf: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if not 0.0 <= self.memory <= 1.0:
            raise ValueError("memory must be in [0, 1]")
        if not 0.0 < self.row_fraction <= 1.0:
            raise ValueError("row_fraction must be in (0, 1]")
        if not 0.0 < self.feature_fraction <= 1.0:
            raise ValueError("feature_fraction must be in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class IsleEnsemble:
    """Trees in generation order, their line-search coefficients, and memory."""

    trees: tuple[RegressionTree, ...]
    coefficients: np.ndarray
    memory: float


def line_search_coefficient(tree_predictions, pseudo_targets) -> float:
    """Closed-form argmin_c sum (r_i - c T_i)^2 = <T, r> / <T, T>; 0 when degenerate."""
    T = np.asarray(tree_predictions, dtype=np.float64)
    r = np.asarray(pseudo_targets, dtype=np.float64)
    tt = float(T @ T)
    if tt == 0.0:
        return 0.0
    return float(T @ r) / tt


def _sample(n: int, p: int, n_rows: int, n_feats: int, seed: int, j: int):
    # one RNG stream per tree index keeps generation order-independent
    rng = np.random.default_rng((seed, j))
    rows = np.sort(rng.choice(n, size=n_rows, replace=False))
    feats = np.sort(rng.choice(p, size=n_feats, replace=False))
    return rows, feats


def generate_ensemble(dataset: Dataset, config: IsleConfig, threads: int = 1) -> IsleEnsemble:
    """Run the sampling loop; parallel across trees when memory is zero."""
    n, p = dataset.n, dataset.p
    n_rows = math.ceil(config.row_fraction * n)
    n_feats = math.ceil(config.feature_fraction * p)
    if n_rows < 2 * config.min_leaf:
        raise ValueError(
            f"row subsample of {n_rows} cannot support min_leaf={config.min_leaf}"
        )
    if n_feats < 1:
        raise ValueError("feature subsample is empty")

    if config.memory == 0.0:
        # pseudo-targets equal y throughout; trees are independent
        def one_tree(j: int):
            rows, feats = _sample(n, p, n_rows, n_feats, config.seed, j)
            tree = fit_tree(dataset, rows, feats, config.max_depth, config.min_leaf)
            preds = tree.predict_batch(dataset.features[rows])
            return tree, line_search_coefficient(preds, dataset.target[rows])

        results = parallel_map(one_tree, range(1, config.num_trees + 1), threads=threads)
        trees = tuple(t for t, _ in results)
        coefs = np.array([c for _, c in results])
        return IsleEnsemble(trees, coefs, 0.0)

    # memory > 0: each round depends on the previous model; inherently serial
    trees_list = []
    coefs = np.empty(config.num_trees)
    running = np.zeros(n)
    for j in range(1, config.num_trees + 1):
        rows, feats = _sample(n, p, n_rows, n_feats, config.seed, j)
        pseudo = dataset.target - running
        tree = fit_tree(
            dataset, rows, feats, config.max_depth, config.min_leaf, targets_override=pseudo
        )
        preds = tree.predict_batch(dataset.features[rows])
        c = line_search_coefficient(preds, pseudo[rows])
        trees_list.append(tree)
        coefs[j - 1] = c
        running += config.memory * c * tree.predict_batch(dataset.features)
    return IsleEnsemble(tuple(trees_list), coefs, config.memory)


def evaluate_memory_model(ensemble: IsleEnsemble, x) -> float:
    """The running-sum model at x: sum_j memory * c_j * T_j(x)."""
    if ensemble.memory == 0.0:
        return 0.0
    return float(
        ensemble.memory
        * sum(c * predict_tree(t, x) for c, t in zip(ensemble.coefficients, ensemble.trees))
    )
