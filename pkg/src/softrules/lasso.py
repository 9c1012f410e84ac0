"""L1-penalized least squares over rule columns by cyclic coordinate descent.

The public penalty scale matches the unnormalized objective

    (y - w0 - Xw)'(y - w0 - Xw) + lambda * sum |w_l|

while the solver works on the equivalent normalized form
(1/2n)||y - Xw||^2 + lambda_n ||w||_1 with lambda_n = lambda / (2n), on
columns standardized to zero mean and unit variance (the intercept is
unpenalized and recovered by centering). The inner loop is compiled with
numba and alternates full sweeps with active-set sweeps; a path of
descending penalties is fitted with warm starts, and the penalty is chosen
by k-fold cross-validation of the held-out squared error.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._util import parallel_map
from .data import kfold

DEFAULT_TOL = 1e-7
DEFAULT_MAX_SWEEPS = 100_000


@dataclass(frozen=True)
class StandardizedDesign:
    """Columns scaled to mean 0 / sd 1, plus the stats to undo the scaling."""

    columns: np.ndarray
    column_means: np.ndarray
    column_sds: np.ndarray
    target_mean: float

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def width(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class LassoFit:
    """Solution at one penalty, on the original column scale.

    weights_std keeps the standardized-scale coefficients for warm starts
    and KKT checks; lambda_ is on the public (unnormalized) scale.
    """

    w0: float
    weights: np.ndarray
    weights_std: np.ndarray
    lambda_: float
    n_active: int
    sweeps: int
    converged: bool


@dataclass(frozen=True)
class CvCurve:
    lambda_grid: np.ndarray
    mean_cv_error: np.ndarray
    sd_cv_error: np.ndarray
    selected_lambda: float


def soft_threshold(z: float, t: float) -> float:
    """sign(z) * max(|z| - t, 0)."""
    if t < 0:
        raise ValueError("threshold must be non-negative")
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def standardize_design(columns: np.ndarray, target: np.ndarray):
    """Center/scale columns and center the target.

    Returns (StandardizedDesign, centered_target). Zero-variance columns are
    the caller's responsibility to remove beforehand.
    """
    columns = np.asarray(columns, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    means = columns.mean(axis=0)
    sds = columns.std(axis=0)
    if np.any(sds == 0.0):
        bad = np.flatnonzero(sds == 0.0)
        raise ValueError(f"constant column(s) {bad.tolist()} reached the solver")
    scaled = np.asfortranarray((columns - means) / sds)
    t_mean = float(target.mean())
    return (
        StandardizedDesign(scaled, means, sds, t_mean),
        target - t_mean,
    )


@njit(cache=True, nogil=True)
def _cd_pass(X, r, w, cols, lam_n):
    n = X.shape[0]
    maxd = 0.0
    for c in range(cols.shape[0]):
        j = cols[c]
        xj = X[:, j]
        s = 0.0
        for i in range(n):
            s += xj[i] * r[i]
        z = s / n + w[j]
        if z > lam_n:
            nw = z - lam_n
        elif z < -lam_n:
            nw = z + lam_n
        else:
            nw = 0.0
        d = w[j] - nw
        if d != 0.0:
            for i in range(n):
                r[i] += xj[i] * d
            w[j] = nw
            ad = abs(d)
            if ad > maxd:
                maxd = ad
    return maxd


@njit(cache=True, nogil=True)
def _cd_burst(X, r, w, lam_n, tol, budget):
    """Up to `budget` sweeps: one full pass, then active-set passes.

    Mutates r and w in place; returns (sweeps used, converged). Convergence
    means a full pass moved no coordinate by more than tol.
    """
    width = X.shape[1]
    all_cols = np.arange(width)
    sweeps = 0
    while sweeps < budget:
        sweeps += 1
        maxd = _cd_pass(X, r, w, all_cols, lam_n)
        if maxd <= tol:
            return sweeps, True
        active = np.nonzero(w)[0]
        while sweeps < budget and active.shape[0] > 0:
            sweeps += 1
            if _cd_pass(X, r, w, active, lam_n) <= tol:
                break
    return sweeps, False


# Sweeps between attempts to jump straight to the stationary point of the
# current active set, and caps on that machinery per solve.
_JUMP_BURST = 10
_MAX_JUMPS = 50
_MAX_DROPS = 40
_RANK_RCOND = 1e-12


def _walk_and_drop(wa, live, direction, target) -> bool:
    """Advance the live weights along direction, stopping at a zero crossing.

    target caps the step. Weights that cross are set to exactly zero so they
    leave the face. Returns True when a crossing was reached (face shrank).
    """
    current = wa[live]
    crossing = np.flatnonzero((direction != 0.0) & (np.sign(direction) != np.sign(current)))
    if crossing.size == 0:
        if np.isfinite(target):
            wa[live] = current + target * direction
        return False
    steps = -current[crossing] / direction[crossing]
    t_cross = float(steps.min())
    if target < t_cross:
        wa[live] = current + target * direction
        return False
    moved = current + t_cross * direction
    moved[crossing[steps == t_cross]] = 0.0
    wa[live] = moved
    return True


def _active_set_jump(X, y, w, lam_n) -> bool:
    """Move w toward the minimizer of the penalized objective on its face.

    The stationarity system X_A'(y - X_A w_A)/n = lam_n * sign(w_A) is
    solved by SVD because rule columns carry exact linear dependencies. When
    the system is inconsistent (the sign vector has a component in the Gram
    null space) the objective descends linearly along that null direction
    until a weight crosses zero; the crossed weight is dropped and the
    smaller system re-solved. A consistent solution is adopted when it keeps
    every sign, else approached by an exact line search. Every move weakly
    decreases the objective, so this only accelerates the plain sweeps.
    Returns True if w moved.
    """
    n = X.shape[0]
    active = np.flatnonzero(w)
    if active.size == 0 or active.size > n:
        return False
    cols = X[:, active]
    gram = cols.T @ cols / n
    corr = cols.T @ y / n
    wa = w[active].copy()
    changed = False
    for _ in range(_MAX_DROPS + 1):
        live = wa != 0.0
        if not live.any():
            break
        signs = np.sign(wa[live])
        sub_gram = gram[np.ix_(live, live)]
        u_mat, sv, vt = np.linalg.svd(sub_gram, hermitian=True)
        rank = int(np.sum(sv > _RANK_RCOND * sv[0])) if sv[0] > 0.0 else 0
        null_signs = vt[rank:] @ signs
        if null_signs @ null_signs > 1e-20:
            # inconsistent face: slide along the null space, shedding weights
            direction = -(vt[rank:].T @ null_signs)
            if not _walk_and_drop(wa, live, direction, np.inf):
                break  # degenerate corner; leave it to the sweeps
            changed = True
            continue
        rhs = corr[live] - lam_n * signs
        sol = vt[:rank].T @ ((u_mat[:, :rank].T @ rhs) / sv[:rank])
        if np.all(np.sign(sol) == signs):
            wa[live] = sol
            changed = True
            break
        current = wa[live]
        direction = sol - current
        curv = float(direction @ (sub_gram @ direction))
        slope = float(direction @ (sub_gram @ current - corr[live])) + lam_n * float(
            signs @ direction
        )
        if slope >= 0.0:
            break  # already at the face optimum boundary-wise
        t_min = 1.0 if curv <= 0.0 else min(1.0, -slope / curv)
        dropped = _walk_and_drop(wa, live, direction, t_min)
        changed = True
        if not dropped:
            break  # stopped at the interior line minimum
    if not changed:
        return False
    w[active] = wa
    return True


def _cd_solve(X, y, w, lam_n, tol, max_sweeps, on_progress=None):
    """Coordinate descent with an exact active-set accelerator.

    Plain sweeps detect violators and certify the result; once per burst the
    jump above snaps the active weights to their stationary values, which
    skips the slow crawl on strongly correlated columns. The solve only
    finishes when a full pass moves no coordinate by more than tol.
    """
    r = y - X @ w
    sweeps = 0
    jumps = 0
    while sweeps < max_sweeps:
        used, converged = _cd_burst(X, r, w, lam_n, tol, min(_JUMP_BURST, max_sweeps - sweeps))
        sweeps += used
        if on_progress is not None:
            on_progress(w.copy())
        if converged:
            return sweeps, True
        if jumps < _MAX_JUMPS:
            jumps += 1
            if _active_set_jump(X, y, w, lam_n):
                active = np.flatnonzero(w)
                r[:] = y - X[:, active] @ w[active]
                if on_progress is not None:
                    on_progress(w.copy())
    return sweeps, False


def fit_lasso(
    design: StandardizedDesign,
    target: np.ndarray,
    lam: float,
    warm_start: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    on_progress=None,
) -> LassoFit:
    """Coordinate descent at one penalty; target must be centered.

    warm_start, when given, is a standardized-scale weight vector (typically
    from the neighboring penalty on a path). on_progress, when given, is
    called with a weight snapshot after every sweep burst (testing hook).
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    n = design.n
    lam_n = lam / (2.0 * n)
    w = np.zeros(design.width) if warm_start is None else np.array(warm_start, dtype=np.float64)
    y = np.ascontiguousarray(target, dtype=np.float64)
    sweeps, converged = _cd_solve(design.columns, y, w, lam_n, tol, max_sweeps, on_progress)
    if not converged:
        warnings.warn(
            f"coordinate descent did not reach tol={tol} within {max_sweeps} sweeps",
            RuntimeWarning,
            stacklevel=2,
        )
    weights = w / design.column_sds
    w0 = design.target_mean - float(weights @ design.column_means)
    return LassoFit(
        w0=w0,
        weights=weights,
        weights_std=w,
        lambda_=float(lam),
        n_active=int(np.count_nonzero(w)),
        sweeps=int(sweeps),
        converged=bool(converged),
    )


def lambda_max(design: StandardizedDesign, target: np.ndarray) -> float:
    """Smallest public-scale penalty at which every weight is zero.

    Nudged up by at most a couple of ulps so that the internal division by
    2n can never land below the exact max correlation.
    """
    n = design.n
    if design.width == 0:
        return 0.0
    m = float(np.max(np.abs(design.columns.T @ target)) / n)
    g = 2.0 * n * m
    while g / (2.0 * n) < m:
        g = np.nextafter(g, np.inf)
    return g


def lasso_objective(
    design: StandardizedDesign, target: np.ndarray, weights_std: np.ndarray, lam: float
) -> float:
    """Normalized penalized objective at standardized weights."""
    n = design.n
    resid = target - design.columns @ weights_std
    return float(resid @ resid / (2.0 * n) + lam / (2.0 * n) * np.abs(weights_std).sum())


def lasso_path(
    design: StandardizedDesign,
    target: np.ndarray,
    grid_size: int = 100,
    lambda_min_ratio: float = 1e-3,
    lambda_grid: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> list[LassoFit]:
    """Warm-started fits on a log-spaced descending penalty grid.

    The grid runs from lambda_max down to lambda_max * lambda_min_ratio
    unless an explicit lambda_grid is supplied (must be descending).
    """
    if lambda_grid is None:
        if grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if design.width == 0:
            raise ValueError("cannot build a path over zero columns")
        top = lambda_max(design, target)
        lambda_grid = np.geomspace(top, top * lambda_min_ratio, grid_size)
    fits: list[LassoFit] = []
    warm = None
    for lam in lambda_grid:
        fit = fit_lasso(design, target, float(lam), warm_start=warm, tol=tol, max_sweeps=max_sweeps)
        fits.append(fit)
        warm = fit.weights_std
    return fits


def cv_select_lambda(
    columns: np.ndarray,
    target: np.ndarray,
    k: int = 10,
    grid_size: int = 100,
    lambda_min_ratio: float = 1e-3,
    seed: int = 0,
    threads: int = 1,
) -> CvCurve:
    """Pick the penalty minimizing mean held-out squared error.

    The grid is built once from the full data so errors are comparable
    across folds; each fold re-standardizes on its own training part and
    drops columns that are constant there. Ties select the larger penalty.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    columns = np.asarray(columns, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    n = columns.shape[0]
    full_design, full_centered = standardize_design(columns, target)
    top = lambda_max(full_design, full_centered)
    grid = np.geomspace(top, top * lambda_min_ratio, grid_size)
    folds = kfold(n, k, seed)

    def fold_errors(fold: int) -> np.ndarray:
        tr = folds.train_rows(fold)
        te = folds.test_rows(fold)
        cols_tr = columns[tr]
        keep = np.flatnonzero(cols_tr.std(axis=0) > 0.0)
        design, centered = standardize_design(cols_tr[:, keep], target[tr])
        fits = lasso_path(design, centered, lambda_grid=grid)
        cols_te = columns[te][:, keep]
        errs = np.empty(grid.shape[0])
        for g, fit in enumerate(fits):
            pred = fit.w0 + cols_te @ fit.weights
            errs[g] = float(np.mean((target[te] - pred) ** 2))
        return errs

    per_fold = np.column_stack(parallel_map(fold_errors, range(k), threads=threads))
    mean_err = per_fold.mean(axis=1)
    sd_err = per_fold.std(axis=1, ddof=1)
    best = 0
    for g in range(1, grid.shape[0]):
        if mean_err[g] < mean_err[best]:  # strict: ties keep the larger penalty
            best = g
    return CvCurve(grid, mean_err, sd_err, float(grid[best]))


def write_cv_curve(curve: CvCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("lambda,mean_cv_error,sd_cv_error\n")
        for lam, m, s in zip(curve.lambda_grid, curve.mean_cv_error, curve.sd_cv_error):
            fh.write(f"{lam!r},{m!r},{s!r}\n")
