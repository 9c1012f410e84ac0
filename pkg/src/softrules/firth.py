"""Bias-corrected logistic regression via the Jeffreys-penalized likelihood.

Plain maximum likelihood diverges whenever the 0/1 response is (quasi-)
separable by the covariates, which happens constantly when fitting smooth
memberships to the crisp output of a decision rule. Penalizing the
likelihood by the square root of the Fisher information determinant keeps
every estimate finite; the penalized score has the closed form

    U*_j = sum_i (y_i - pi_i + h_i (1/2 - pi_i)) x_ij

with h_i the hat-matrix diagonals, and its root is found by Newton steps
preconditioned with the Fisher information, safeguarded by step-halving on
the penalized log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

# Linear predictors are clamped here before the sigmoid; far beyond any
# resolvable coefficient at the default score tolerance.
CLAMP = 30.0


class RankDeficientDesignError(np.linalg.LinAlgError):
    """Design matrix is not full column rank; caller should screen columns."""


@dataclass(frozen=True)
class LogisticDesign:
    """n x k design whose first column is the intercept, plus 0/1 labels."""

    design: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(self.design, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValueError("design must be n x k with k >= 1")
        if not np.all(X[:, 0] == 1.0):
            raise ValueError("first design column must be the intercept (all ones)")
        if y.shape != (X.shape[0],) or not np.all(np.isin(y, (0.0, 1.0))):
            raise ValueError("labels must be a length-n 0/1 vector")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def k(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class FirthFit:
    theta: np.ndarray
    log_likelihood: float
    penalized_log_likelihood: float
    hat_diagonals: np.ndarray
    iterations: int
    converged: bool


def probabilities(theta: np.ndarray, design: LogisticDesign) -> np.ndarray:
    return expit(np.clip(design.design @ theta, -CLAMP, CLAMP))


def fisher_information(theta: np.ndarray, design: LogisticDesign) -> np.ndarray:
    """X'WX with W = diag(pi (1 - pi)); symmetric positive semidefinite."""
    pi = probabilities(theta, design)
    w = pi * (1.0 - pi)
    X = design.design
    return X.T @ (X * w[:, None])


def hat_diagonals(theta: np.ndarray, design: LogisticDesign) -> np.ndarray:
    """Diagonal of W^{1/2} X (X'WX)^{-1} X' W^{1/2}; each in [0, 1], summing to k."""
    pi = probabilities(theta, design)
    w = pi * (1.0 - pi)
    X = design.design
    info = X.T @ (X * w[:, None])
    try:
        V = np.linalg.solve(info, X.T)
    except np.linalg.LinAlgError:
        raise RankDeficientDesignError("singular X'WX in hat_diagonals") from None
    return w * np.einsum("ij,ji->i", X, V)


def modified_score(theta: np.ndarray, design: LogisticDesign) -> np.ndarray:
    """Penalized score U*; its root is the bias-corrected estimate."""
    pi = probabilities(theta, design)
    h = hat_diagonals(theta, design)
    return design.design.T @ (design.labels - pi + h * (0.5 - pi))


def log_likelihood(theta: np.ndarray, design: LogisticDesign) -> float:
    """Unpenalized Bernoulli log-likelihood at theta."""
    pi = probabilities(theta, design)
    y = design.labels
    return float(np.sum(y * np.log(pi) + (1.0 - y) * np.log1p(-pi)))


def penalized_log_likelihood(theta: np.ndarray, design: LogisticDesign) -> float:
    """log L + 0.5 log det(X'WX); -inf when the information is singular."""
    sign, logdet = np.linalg.slogdet(fisher_information(theta, design))
    if sign <= 0:
        return -np.inf
    return log_likelihood(theta, design) + 0.5 * logdet


def screen_full_rank(X: np.ndarray, rel_tol: float = 1e-10) -> list[int]:
    """Indices of a maximal independent column subset, earliest columns first.

    Later columns are dropped in favor of earlier ones, so an intercept in
    column 0 always survives. Independence is judged against rel_tol times
    the column norm.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    kept: list[int] = []
    basis = np.empty((n, 0))
    for j in range(X.shape[1]):
        col = X[:, j]
        resid = col - basis @ (basis.T @ col)
        resid = resid - basis @ (basis.T @ resid)
        norm = np.linalg.norm(resid)
        if norm > rel_tol * max(np.linalg.norm(col), 1.0):
            kept.append(j)
            basis = np.column_stack([basis, resid / norm])
    return kept


def fit_firth(design: LogisticDesign, tol: float = 1e-6, max_iter: int = 50) -> FirthFit:
    """Newton iteration on the penalized score from theta = 0.

    Each step solves I(theta) step = U*(theta) and halves the step (up to 16
    times) while the penalized log-likelihood would decrease, so accepted
    iterates never lose penalized likelihood. Stops when max|U*| <= tol.
    Always returns finite coefficients, separation included.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    X = design.design
    kept = screen_full_rank(X)
    if len(kept) != design.k:
        raise RankDeficientDesignError(
            f"design is rank deficient: {design.k} columns, rank {len(kept)}"
        )
    y = design.labels
    theta = np.zeros(design.k)
    pll = penalized_log_likelihood(theta, design)
    iterations = 0
    converged = False
    final_h = None
    for _ in range(max_iter):
        pi = probabilities(theta, design)
        w = pi * (1.0 - pi)
        info = X.T @ (X * w[:, None])
        try:
            V = np.linalg.solve(info, X.T)
        except np.linalg.LinAlgError:
            break  # information collapsed numerically; keep current finite theta
        h = w * np.einsum("ij,ji->i", X, V)
        final_h = h
        resid = y - pi + h * (0.5 - pi)
        score = X.T @ resid
        if np.max(np.abs(score)) <= tol:
            converged = True
            break
        step = V @ resid
        new_theta = theta + step
        new_pll = penalized_log_likelihood(new_theta, design)
        halvings = 0
        while new_pll < pll and halvings < 16:
            step *= 0.5
            new_theta = theta + step
            new_pll = penalized_log_likelihood(new_theta, design)
            halvings += 1
        if new_pll < pll:
            break  # no ascent along the Newton direction; stall out
        theta, pll = new_theta, new_pll
        iterations += 1
        final_h = None  # stale after the step
    if final_h is None:
        try:
            final_h = hat_diagonals(theta, design)
            if not converged:
                pi = probabilities(theta, design)
                score = X.T @ (y - pi + final_h * (0.5 - pi))
                converged = bool(np.max(np.abs(score)) <= tol)
        except RankDeficientDesignError:
            final_h = np.full(design.n, np.nan)
    return FirthFit(
        theta=theta,
        log_likelihood=log_likelihood(theta, design),
        penalized_log_likelihood=pll,
        hat_diagonals=final_h,
        iterations=iterations,
        converged=converged,
    )
