import numpy as np
import pytest

from softrules.data import Dataset
from softrules.rules import (
    Condition,
    HardRule,
    dedupe_and_prune,
    evaluate_rule,
    extract_rules,
    rule_matrix,
)
from softrules.tree import fit_tree, predict_tree


def step_tree(max_depth=1):
    ds = Dataset(np.array([[1.0], [2.0], [3.0], [4.0]]), ("f0",), np.array([0.0, 0, 1, 1]))
    return ds, fit_tree(ds, np.arange(4), [0], max_depth=max_depth, min_leaf=1)


def random_tree(rng, n=150, p=4, depth=3):
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    ds = Dataset(X, tuple(f"f{i}" for i in range(p)), y)
    return ds, fit_tree(ds, np.arange(n), range(p), max_depth=depth, min_leaf=2)


class TestCondition:
    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            Condition(0, 2.0, 2.0)

    def test_boundaries(self):
        c = Condition(0, 0.5, 2.5)
        assert not c.holds(0.5)  # lower side open
        assert c.holds(2.5)      # upper side closed
        assert c.holds(1.0)


class TestExtractRules:
    def test_stump_yields_two_rules(self):
        _, tree = step_tree()
        rules = extract_rules(tree, tree_index=3)
        assert len(rules) == 2
        left, right = rules
        assert left.conditions == (Condition(0, upper=2.5),)
        assert right.conditions == (Condition(0, lower=2.5),)
        assert left.rule_id == "t3n1" and right.rule_id == "t3n2"

    def test_full_depth2_tree_yields_six_rules(self, rng):
        # grow until a full depth-2 tree appears (7 nodes)
        for seed in range(50):
            local = np.random.default_rng(seed)
            ds, tree = random_tree(local, n=100, p=2, depth=2)
            if len(tree.nodes) == 7:
                assert len(extract_rules(tree, 0)) == 6
                return
        pytest.fail("no full depth-2 tree found")

    def test_same_feature_path_intersects(self):
        # x0 <= 5 then x0 <= 3: left-left rule must carry the single tighter bound
        X = np.array([[1.0], [2.0], [4.0], [6.0], [7.0], [2.5]])
        y = np.array([0.0, 0.0, 5.0, 9.0, 9.0, 0.0])
        ds = Dataset(X, ("f0",), y)
        tree = fit_tree(ds, np.arange(6), [0], max_depth=2, min_leaf=1)
        rules = {r.rule_id: r for r in extract_rules(tree, 0)}
        deepest = [r for r in rules.values() if r.source[1] != 0]
        for rule in deepest:
            assert len(rule.conditions) == 1  # single feature: always one interval
            lo, hi = rule.conditions[0].lower, rule.conditions[0].upper
            assert lo < hi

    def test_rule_count_is_nodes_minus_root(self, rng):
        for _ in range(10):
            _, tree = random_tree(rng)
            assert len(extract_rules(tree, 0)) == len(tree.nodes) - 1


class TestEvaluateRule:
    def test_boundary_matches_tree_routing(self):
        rule = HardRule((Condition(0, upper=2.5),), (0, 1), "t0n1")
        assert evaluate_rule(rule, [2.5]) == 1
        other = HardRule((Condition(0, lower=2.5),), (0, 2), "t0n2")
        assert evaluate_rule(other, [2.5]) == 0

    def test_empty_conjunction_fires(self):
        rule = HardRule((), (0, 0), "t0n0")
        assert evaluate_rule(rule, [1.0, 2.0]) == 1

    def test_agrees_with_tree_visits(self, rng):
        ds, tree = random_tree(rng)
        rules = extract_rules(tree, 0)
        probes = rng.standard_normal((40, ds.p))

        def visits(node_id, x):
            seen = set()
            node = tree.nodes[0]
            while True:
                seen.add(node.node_id)
                if node.is_leaf:
                    return node_id in seen
                nxt = node.left if x[node.split_feature] <= node.threshold else node.right
                node = tree.nodes[nxt]

        for x in probes:
            for rule in rules:
                assert evaluate_rule(rule, x) == int(visits(rule.source[1], x))


class TestRuleMatrix:
    def test_stump_columns(self):
        ds, tree = step_tree()
        rules = extract_rules(tree, 0)
        R = rule_matrix(rules, ds.features)
        np.testing.assert_array_equal(R[:, 0], [1, 1, 0, 0])
        np.testing.assert_array_equal(R[:, 1], [0, 0, 1, 1])

    def test_empty_ruleset(self):
        R = rule_matrix([], np.ones((5, 2)))
        assert R.shape == (5, 0)

    def test_sibling_columns_sum_to_parent(self, rng):
        for _ in range(5):
            ds, tree = random_tree(rng)
            rules = {r.source[1]: r for r in extract_rules(tree, 0)}
            probes = rng.standard_normal((60, ds.p))
            for node in tree.nodes:
                if node.is_leaf:
                    continue
                left = rule_matrix([rules[node.left]], probes)[:, 0]
                right = rule_matrix([rules[node.right]], probes)[:, 0]
                if node.node_id == 0:
                    parent = np.ones(60)
                else:
                    parent = rule_matrix([rules[node.node_id]], probes)[:, 0]
                np.testing.assert_array_equal(left + right, parent)

    def test_terminal_partition_and_tree_identity(self, rng):
        for _ in range(5):
            ds, tree = random_tree(rng)
            rules = {r.source[1]: r for r in extract_rules(tree, 0)}
            leaf_ids = tree.leaf_ids()
            probes = rng.standard_normal((200, ds.p))
            R = rule_matrix([rules[i] for i in leaf_ids], probes)
            np.testing.assert_array_equal(R.sum(axis=1), np.ones(200))
            beta = np.array([tree.nodes[i].prediction for i in leaf_ids])
            np.testing.assert_array_equal(R @ beta, tree.predict_batch(probes))


class TestDedupeAndPrune:
    def test_exact_duplicates_keep_first(self):
        a = HardRule((Condition(0, upper=2.5),), (1, 1), "t1n1")
        b = HardRule((Condition(0, upper=2.5),), (2, 4), "t2n4")
        feats = np.array([[1.0], [2.0], [3.0]])
        rs = dedupe_and_prune([b, a], feats)
        assert len(rs) == 1
        assert rs.rules[0].rule_id == "t1n1"

    def test_constant_rules_dropped(self):
        always = HardRule((Condition(0, upper=100.0),), (1, 1), "t1n1")
        never = HardRule((Condition(0, lower=100.0),), (1, 2), "t1n2")
        feats = np.array([[1.0], [2.0]])
        assert len(dedupe_and_prune([always, never], feats)) == 0

    def test_extensionally_equal_but_distinct_conditions_kept(self):
        a = HardRule((Condition(0, upper=2.5),), (1, 1), "t1n1")
        b = HardRule((Condition(0, upper=2.6),), (1, 2), "t1n2")  # same column on this data
        feats = np.array([[1.0], [2.0], [3.0]])
        rs = dedupe_and_prune([a, b], feats)
        assert len(rs) == 2

    def test_support_bounds(self):
        rare = HardRule((Condition(0, lower=8.5),), (1, 1), "t1n1")
        common = HardRule((Condition(0, upper=8.5),), (1, 2), "t1n2")
        feats = np.arange(10.0)[:, None]
        rs = dedupe_and_prune([rare, common], feats, min_support=0.2, max_support=0.8)
        assert [r.rule_id for r in rs.rules] == ["t1n2"]

    def test_rule_text_grammar(self):
        rule = HardRule((Condition(3, 0.5, np.inf), Condition(7, -np.inf, 1.25)), (0, 5), "t0n5")
        assert rule.text() == "x3 in (0.5, +inf] AND x7 in (-inf, 1.25]"
