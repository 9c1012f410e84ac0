import numpy as np
import pytest

from softrules.data import Dataset
from softrules.tree import best_split, fit_tree, predict_tree


def brute_force_split(values, targets, min_leaf):
    """Independent oracle: enumerate every midpoint of adjacent distinct values."""
    values = np.asarray(values, float)
    targets = np.asarray(targets, float)
    m = len(values)
    order = np.argsort(values, kind="stable")
    v, t = values[order], targets[order]
    sse = lambda a: float(np.sum((a - a.mean()) ** 2)) if len(a) else 0.0
    parent = sse(t)
    best = None
    for i in range(1, m):
        if v[i - 1] == v[i] or i < min_leaf or m - i < min_leaf:
            continue
        red = parent - sse(t[:i]) - sse(t[i:])
        if red > 1e-12 * (parent + 1.0) and (best is None or red > best[1]):
            best = ((v[i - 1] + v[i]) / 2.0, red)
    return best


def make_dataset(x, y):
    x = np.asarray(x, float)
    if x.ndim == 1:
        x = x[:, None]
    names = tuple(f"f{i}" for i in range(x.shape[1]))
    return Dataset(x, names, np.asarray(y, float))


class TestBestSplit:
    def test_step_targets(self):
        thr, red = best_split(np.array([1.0, 2, 3, 4]), np.array([0.0, 0, 1, 1]), 1)
        assert thr == 2.5
        assert red == pytest.approx(1.0)

    def test_no_distinct_values(self):
        assert best_split(np.array([7.0, 7, 7]), np.array([1.0, 2, 3]), 1) is None

    def test_two_rows(self):
        thr, red = best_split(np.array([1.0, 2.0]), np.array([0.0, 10.0]), 1)
        assert thr == 1.5
        assert red == pytest.approx(50.0)

    def test_min_leaf_blocks(self):
        assert best_split(np.array([1.0, 2, 3, 4]), np.array([0.0, 0, 1, 1]), 3) is None

    def test_matches_brute_force(self, rng):
        for _ in range(80):
            m = int(rng.integers(2, 25))
            values = np.round(rng.standard_normal(m), 1)  # force some ties
            targets = rng.standard_normal(m)
            min_leaf = int(rng.integers(1, 4))
            got = best_split(values, targets, min_leaf)
            want = brute_force_split(values, targets, min_leaf)
            if want is None:
                assert got is None
            else:
                assert got is not None
                assert got[0] == pytest.approx(want[0])
                assert got[1] == pytest.approx(want[1], rel=1e-9)


class TestFitTree:
    def test_stump_on_step(self):
        ds = make_dataset([1, 2, 3, 4], [0, 0, 1, 1])
        tree = fit_tree(ds, np.arange(4), [0], max_depth=1, min_leaf=1)
        root = tree.nodes[0]
        assert root.split_feature == 0 and root.threshold == 2.5
        assert tree.nodes[root.left].prediction == 0.0
        assert tree.nodes[root.right].prediction == 1.0

    def test_constant_target_single_leaf(self):
        ds = make_dataset([1, 2, 3, 4], [3.7, 3.7, 3.7, 3.7])
        tree = fit_tree(ds, np.arange(4), [0], max_depth=3, min_leaf=1)
        assert len(tree.nodes) == 1
        assert predict_tree(tree, [99.0]) == 3.7

    def test_min_leaf_prevents_split(self):
        ds = make_dataset([1, 2, 3, 4], [0, 0, 1, 1])
        tree = fit_tree(ds, np.arange(4), [0], max_depth=3, min_leaf=3)
        assert len(tree.nodes) == 1

    def test_boundary_routes_left(self):
        ds = make_dataset([1, 2, 3, 4], [0, 0, 1, 1])
        tree = fit_tree(ds, np.arange(4), [0], max_depth=1, min_leaf=1)
        assert predict_tree(tree, [2.5]) == 0.0
        assert predict_tree(tree, [2.5000001]) == 1.0

    def test_empty_rows_rejected(self):
        ds = make_dataset([1, 2], [0, 1])
        with pytest.raises(ValueError):
            fit_tree(ds, [], [0], max_depth=1)
        with pytest.raises(ValueError):
            fit_tree(ds, [0, 1], [], max_depth=1)

    def test_respects_allowed_features(self, rng):
        X = rng.standard_normal((60, 4))
        y = X[:, 0] * 3.0 + rng.standard_normal(60) * 0.01
        ds = Dataset(X, ("a", "b", "c", "d"), y)
        tree = fit_tree(ds, np.arange(60), [1, 3], max_depth=3, min_leaf=2)
        used = {n.split_feature for n in tree.nodes if not n.is_leaf}
        assert used <= {1, 3}

    def test_depth_limit(self, rng):
        X = rng.standard_normal((200, 2))
        y = rng.standard_normal(200)
        ds = Dataset(X, ("a", "b"), y)
        tree = fit_tree(ds, np.arange(200), [0, 1], max_depth=3, min_leaf=1)
        assert max(n.depth for n in tree.nodes) <= 3


class TestTreeProperties:
    def _random_tree(self, rng, n=120, p=3, depth=4):
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        ds = Dataset(X, tuple(f"f{i}" for i in range(p)), y)
        rows = np.arange(n)
        return ds, fit_tree(ds, rows, range(p), max_depth=depth, min_leaf=2)

    def test_fitted_value_property(self, rng):
        for _ in range(10):
            ds, tree = self._random_tree(rng)
            preds = tree.predict_batch(ds.features)
            # every training row predicts the mean of its leaf's routed targets
            leaves = {}
            for i in range(ds.n):
                leaves.setdefault(preds[i], []).append(ds.target[i])
            for leaf_pred, targets in leaves.items():
                assert leaf_pred == pytest.approx(np.mean(targets), abs=1e-12)

    def test_sse_strictly_decreases_at_each_split(self, rng):
        for _ in range(10):
            ds, tree = self._random_tree(rng)

            def routed(node_id, idx):
                node = tree.nodes[node_id]
                if node.is_leaf:
                    return
                m = ds.features[idx, node.split_feature] <= node.threshold
                left, right = idx[m], idx[~m]
                sse = lambda rows: float(np.sum((ds.target[rows] - ds.target[rows].mean()) ** 2))
                assert sse(left) + sse(right) < sse(idx)
                routed(node.left, left)
                routed(node.right, right)

            routed(0, np.arange(ds.n))

    def test_determinism(self, rng):
        X = rng.standard_normal((80, 3))
        y = rng.standard_normal(80)
        ds = Dataset(X, ("a", "b", "c"), y)
        t1 = fit_tree(ds, np.arange(80), [0, 1, 2], max_depth=4, min_leaf=2)
        t2 = fit_tree(ds, np.arange(80), [0, 1, 2], max_depth=4, min_leaf=2)
        assert [(n.split_feature, n.threshold, n.prediction) for n in t1.nodes] == [
            (n.split_feature, n.threshold, n.prediction) for n in t2.nodes
        ]

    def test_batch_matches_scalar(self, rng):
        ds, tree = self._random_tree(rng)
        probes = rng.standard_normal((50, 3))
        batch = tree.predict_batch(probes)
        for i in range(50):
            assert batch[i] == predict_tree(tree, probes[i])

    def test_train_counts(self, rng):
        ds, tree = self._random_tree(rng)
        root = tree.nodes[0]
        assert root.train_count == ds.n
        for node in tree.nodes:
            if not node.is_leaf:
                kids = tree.nodes[node.left], tree.nodes[node.right]
                assert kids[0].train_count + kids[1].train_count == node.train_count
                assert kids[0].depth == kids[1].depth == node.depth + 1
