"""Conversion of hard rules into smooth membership functions.

For a rule over features F, the candidate basis is {z_f, z_f^2 : f in F}
where z_f is the feature standardized by its training mean and standard
deviation (quadratics on raw scales are numerically hostile). The subset of
basis terms minimizing AIC is found by exhaustive search (or forward
stepwise past 12 candidates), each candidate fit by bias-corrected logistic
regression against the rule's 0/1 training output. The resulting membership

    s(x) = sigmoid(theta_0 + sum_t theta_t z^power)

is strictly inside (0, 1) and plays the role of the rule column in the
final sparse linear fit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import firth
from .rules import HardRule, rule_column

# Exhaustive subset search up to this many candidate terms (2^12 fits);
# beyond it, forward stepwise with AIC stopping.
EXHAUSTIVE_LIMIT = 12


@dataclass(frozen=True)
class TermSpec:
    feature: int
    power: int  # 1 or 2

    def __post_init__(self):
        if self.power not in (1, 2):
            raise ValueError(f"power must be 1 or 2, got {self.power}")


@dataclass(frozen=True)
class SoftRule:
    """Selected terms, fitted coefficients and standardization for one rule.

    theta holds the intercept first, then one coefficient per term, all in
    standardized coordinates. standardization maps feature index to the
    (mean, sd) pair frozen from the training data.
    """

    rule_id: str
    terms: tuple[TermSpec, ...]
    theta: np.ndarray
    standardization: tuple[tuple[int, float, float], ...]
    aic: float
    converged: bool
    iterations: int

    def linear_predictor(self, features: np.ndarray) -> np.ndarray:
        stats = {f: (m, s) for f, m, s in self.standardization}
        lp = np.full(features.shape[0], self.theta[0])
        for coef, term in zip(self.theta[1:], self.terms):
            mean, sd = stats[term.feature]
            z = (features[:, term.feature] - mean) / sd
            lp += coef * (z if term.power == 1 else z * z)
        return lp


def candidate_terms(rule: HardRule) -> list[TermSpec]:
    """Linear and quadratic terms for each distinct feature in the rule."""
    feats = sorted(set(rule.features()))
    if not feats:
        raise ValueError("rule has no conditions")
    return [TermSpec(f, power) for f in feats for power in (1, 2)]


def _standardization(features: np.ndarray, feats) -> dict[int, tuple[float, float]]:
    out = {}
    for f in feats:
        col = features[:, f]
        sd = float(col.std())
        # constant columns standardize to zero and get rank-screened away
        out[f] = (float(col.mean()), sd if sd > 0.0 else 1.0)
    return out


def _term_matrix(features: np.ndarray, terms, stats) -> np.ndarray:
    cols = []
    for t in terms:
        mean, sd = stats[t.feature]
        z = (features[:, t.feature] - mean) / sd
        cols.append(z if t.power == 1 else z * z)
    if not cols:
        return np.empty((features.shape[0], 0))
    return np.column_stack(cols)


def _fit_subset(term_cols, subset, labels, ones, tol, max_iter):
    """Fit one candidate subset; returns (aic, kept subset, fit)."""
    design = np.column_stack([ones] + [term_cols[:, i] for i in subset])
    kept_cols = firth.screen_full_rank(design)
    design = design[:, kept_cols]
    kept_terms = tuple(subset[i - 1] for i in kept_cols[1:])  # column 0 is the intercept
    fit = firth.fit_firth(firth.LogisticDesign(design, labels), tol=tol, max_iter=max_iter)
    aic = -2.0 * fit.log_likelihood + 2.0 * design.shape[1]
    return aic, kept_terms, fit


def best_subset_aic(
    features: np.ndarray,
    rule_column_values: np.ndarray,
    terms,
    tol: float = 1e-6,
    max_iter: int = 50,
):
    """AIC-minimizing term subset fit to the rule's 0/1 outputs.

    AIC is -2 * (unpenalized log-likelihood at the bias-corrected estimates)
    plus 2 * (intercept + retained terms). The empty subset (intercept only)
    competes too. Ties break toward fewer terms, then lexicographic term
    order — guaranteed by the enumeration order. Returns
    (selected_terms, FirthFit, aic).
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(rule_column_values, dtype=np.float64)
    if labels.min() == labels.max():
        raise ValueError("rule column is constant; caller must drop the rule")
    terms = list(terms)
    stats = _standardization(features, sorted({t.feature for t in terms}))
    term_cols = _term_matrix(features, terms, stats)
    ones = np.ones(features.shape[0])

    best = None  # (aic, term indices, fit)
    if len(terms) <= EXHAUSTIVE_LIMIT:
        for size in range(len(terms) + 1):
            for subset in itertools.combinations(range(len(terms)), size):
                aic, kept, fit = _fit_subset(term_cols, subset, labels, ones, tol, max_iter)
                if best is None or aic < best[0]:
                    best = (aic, kept, fit)
    else:
        current: tuple[int, ...] = ()
        best = _fit_subset(term_cols, current, labels, ones, tol, max_iter)
        remaining = list(range(len(terms)))
        while remaining:
            trial_best = None
            for idx in remaining:
                subset = tuple(sorted(current + (idx,)))
                cand = _fit_subset(term_cols, subset, labels, ones, tol, max_iter)
                if trial_best is None or cand[0] < trial_best[0]:
                    trial_best = (*cand, idx)
            if trial_best is None or trial_best[0] >= best[0]:
                break
            best = trial_best[:3]
            current = tuple(sorted(current + (trial_best[3],)))
            remaining.remove(trial_best[3])

    aic, kept_idx, fit = best
    selected = tuple(terms[i] for i in kept_idx)
    return selected, fit, aic, stats


def soften(
    rule: HardRule,
    features: np.ndarray,
    tol: float = 1e-6,
    max_iter: int = 50,
) -> SoftRule:
    """Fit the smooth membership for one (non-constant) hard rule."""
    features = np.asarray(features, dtype=np.float64)
    column = rule_column(rule, features)
    selected, fit, aic, stats = best_subset_aic(
        features, column, candidate_terms(rule), tol=tol, max_iter=max_iter
    )
    used = sorted({t.feature for t in selected})
    return SoftRule(
        rule_id=rule.rule_id,
        terms=selected,
        theta=fit.theta,
        standardization=tuple((f, stats[f][0], stats[f][1]) for f in used),
        aic=aic,
        converged=fit.converged,
        iterations=fit.iterations,
    )


def evaluate_soft(soft_rule: SoftRule, x) -> float:
    """Membership value for one feature vector, strictly inside (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    lp = soft_rule.linear_predictor(x[None, :])[0]
    return float(expit(np.clip(lp, -firth.CLAMP, firth.CLAMP)))


def soft_column(soft_rule: SoftRule, features: np.ndarray) -> np.ndarray:
    lp = soft_rule.linear_predictor(features)
    return expit(np.clip(lp, -firth.CLAMP, firth.CLAMP))


def soft_matrix(soft_rules, features: np.ndarray) -> np.ndarray:
    """n x L matrix of memberships, entries in the open unit interval."""
    features = np.asarray(features, dtype=np.float64)
    if not soft_rules:
        return np.empty((features.shape[0], 0), dtype=np.float64)
    return np.column_stack([soft_column(s, features) for s in soft_rules])
