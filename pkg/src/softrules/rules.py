"""Conjunctive hard rules harvested from tree nodes, and the binary rule matrix.

A rule is an AND of per-feature intervals with semantics lower < x <= upper,
matching the tree convention that values equal to a threshold route left.
Every non-root node of a tree yields one rule: the conjunction of conditions
along the path from the root, with same-feature intervals intersected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import RegressionTree

NEG_INF = float("-inf")
POS_INF = float("inf")


@dataclass(frozen=True)
class Condition:
    """Interval membership test on one feature: lower < x[feature] <= upper."""

    feature: int
    lower: float = NEG_INF
    upper: float = POS_INF

    def __post_init__(self):
        # plain Python scalars keep repr-based serialization exact
        object.__setattr__(self, "feature", int(self.feature))
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        if not self.lower < self.upper:
            raise ValueError(f"empty interval ({self.lower}, {self.upper}] on feature {self.feature}")

    def holds(self, value: float) -> bool:
        return self.lower < value <= self.upper

    def text(self) -> str:
        lo = "-inf" if self.lower == NEG_INF else repr(self.lower)
        hi = "+inf" if self.upper == POS_INF else repr(self.upper)
        return f"x{self.feature} in ({lo}, {hi}]"


@dataclass(frozen=True)
class HardRule:
    """Conjunction of conditions; evaluates to 1 iff all hold.

    source is (tree_index, node_id); rule_id is a stable text identifier
    derived from it. Conditions are kept sorted by feature, one per feature.
    """

    conditions: tuple[Condition, ...]
    source: tuple[int, int]
    rule_id: str

    def condition_key(self) -> tuple:
        return tuple((c.feature, c.lower, c.upper) for c in self.conditions)

    def features(self) -> tuple[int, ...]:
        return tuple(c.feature for c in self.conditions)

    def text(self) -> str:
        return " AND ".join(c.text() for c in self.conditions)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[HardRule, ...]
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.rules)


def extract_rules(tree: RegressionTree, tree_index: int) -> list[HardRule]:
    """One rule per non-root node, internal and terminal alike.

    Rules are emitted in node_id (preorder) order, so extraction is
    deterministic and rule_ids are stable.
    """
    out: list[HardRule] = []

    def walk(node_id: int, intervals: dict[int, tuple[float, float]]):
        node = tree.nodes[node_id]
        if node_id != tree.root:
            conds = tuple(
                Condition(f, lo, hi) for f, (lo, hi) in sorted(intervals.items())
            )
            out.append(HardRule(conds, (tree_index, node_id), f"t{tree_index}n{node_id}"))
        if not node.is_leaf:
            f, thr = node.split_feature, node.threshold
            lo, hi = intervals.get(f, (NEG_INF, POS_INF))
            left = dict(intervals)
            left[f] = (lo, min(hi, thr))
            walk(node.left, left)
            right = dict(intervals)
            right[f] = (max(lo, thr), hi)
            walk(node.right, right)

    walk(tree.root, {})
    out.sort(key=lambda r: r.source)  # node_id order
    return out


def evaluate_rule(rule: HardRule, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    return int(all(c.holds(x[c.feature]) for c in rule.conditions))


def rule_column(rule: HardRule, features: np.ndarray) -> np.ndarray:
    """Rule indicator over all rows of a feature matrix, as float 0/1."""
    fired = np.ones(features.shape[0], dtype=bool)
    for c in rule.conditions:
        col = features[:, c.feature]
        fired &= (col > c.lower) & (col <= c.upper)
    return fired.astype(np.float64)


def rule_matrix(rules, features: np.ndarray) -> np.ndarray:
    """n x L binary matrix: entry (i, l) is rules[l] evaluated on row i."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    cols = [rule_column(r, features) for r in rules]
    if not cols:
        return np.empty((n, 0), dtype=np.float64)
    return np.column_stack(cols)


def dedupe_and_prune(
    rules,
    features: np.ndarray,
    min_support: float = 0.0,
    max_support: float = 1.0,
    provenance: str = "",
) -> RuleSet:
    """Drop constant and out-of-support rules, collapse exact duplicates.

    Duplicates are syntactic (equal condition sets after interval
    intersection); the first occurrence in (tree_index, node_id) order wins.
    min/max_support bound the training firing fraction; the strict-constant
    check (all 0 or all 1) always applies.
    """
    features = np.asarray(features, dtype=np.float64)
    ordered = sorted(rules, key=lambda r: r.source)
    seen: set[tuple] = set()
    kept: list[HardRule] = []
    for rule in ordered:
        key = rule.condition_key()
        if key in seen:
            continue
        seen.add(key)
        frac = rule_column(rule, features).mean()
        if frac <= 0.0 or frac >= 1.0:
            continue
        if frac < min_support or frac > max_support:
            continue
        kept.append(rule)
    return RuleSet(tuple(kept), provenance)
