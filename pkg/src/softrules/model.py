"""End-to-end pipeline: trees -> rules -> (optional softening) -> sparse weights.

Also houses the prediction path, rule/variable importance, evaluation
metrics, the k-fold evaluation harness and the versioned model file format.
"""

from __future__ import annotations

import hashlib
import os
import re
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from ._util import parallel_map
from .data import Dataset, kfold
from .isle import IsleConfig, generate_ensemble
from .lasso import cv_select_lambda, lasso_path, standardize_design
from .rules import Condition, HardRule, RuleSet, dedupe_and_prune, extract_rules, rule_matrix
from .soft import SoftRule, TermSpec, soft_matrix, soften

MODEL_MAGIC = "softrules-model v1"


class TrainingError(RuntimeError):
    """Pipeline cannot produce a usable model (e.g. no rules survive)."""


class ModelFormatError(ValueError):
    """Model file is malformed or has an unsupported version."""


@dataclass(frozen=True)
class LassoParams:
    grid_size: int = 100
    lambda_min_ratio: float = 1e-3
    cv_folds: int = 10


@dataclass(frozen=True)
class FirthParams:
    tol: float = 1e-6
    max_iter: int = 50


@dataclass(frozen=True)
class PruneParams:
    min_support: float = 0.005
    max_support: float = 0.995


@dataclass(frozen=True)
class PipelineConfig:
    isle: IsleConfig
    mode: str = "hard"
    lasso: LassoParams = field(default_factory=LassoParams)
    firth: FirthParams = field(default_factory=FirthParams)
    prune: PruneParams = field(default_factory=PruneParams)

    def __post_init__(self):
        if self.mode not in ("hard", "soft"):
            raise ValueError(f"mode must be 'hard' or 'soft', got {self.mode!r}")


@dataclass
class RuleEnsembleModel:
    """Fitted sparse combination of (possibly softened) rules."""

    mode: str
    ruleset: RuleSet
    soft_rules: tuple[SoftRule, ...] | None
    w0: float
    weights: dict[str, float]
    lambda_: float
    target_kind: str
    p: int
    feature_names: tuple[str, ...]
    training_digest: str

    @property
    def n_rules(self) -> int:
        return len(self.ruleset)

    @property
    def n_active(self) -> int:
        return len(self.weights)

    def retained_rules(self) -> list[HardRule]:
        return [r for r in self.ruleset.rules if r.rule_id in self.weights]


@dataclass(frozen=True)
class ImportanceReport:
    rule_importance: dict[str, float]
    variable_importance: np.ndarray


def dataset_digest(dataset: Dataset) -> str:
    h = hashlib.sha256()
    h.update(",".join(dataset.feature_names).encode())
    h.update(dataset.target_kind.encode())
    h.update(np.ascontiguousarray(dataset.features).tobytes())
    h.update(np.ascontiguousarray(dataset.target).tobytes())
    return h.hexdigest()


def config_digest(config: PipelineConfig) -> str:
    return hashlib.sha256(repr(config).encode()).hexdigest()


def ruleset_digest(ruleset: RuleSet) -> str:
    text = "\n".join(f"{r.rule_id}: {r.text()}" for r in ruleset.rules)
    return hashlib.sha256(text.encode()).hexdigest()


def train(dataset: Dataset, config: PipelineConfig, threads: int = 1) -> RuleEnsembleModel:
    """Run the full pipeline; deterministic given (dataset, config).

    Steps: generate the tree ensemble, harvest/dedupe/prune rules, soften
    them in soft mode, cross-validate the penalty on the rule columns, and
    fit the final weights at the selected penalty.
    """
    ensemble = generate_ensemble(dataset, config.isle, threads=threads)
    harvested = [
        rule
        for j, tree in enumerate(ensemble.trees, start=1)
        for rule in extract_rules(tree, j)
    ]
    ruleset = dedupe_and_prune(
        harvested,
        dataset.features,
        min_support=config.prune.min_support,
        max_support=config.prune.max_support,
        provenance=config_digest(config),
    )
    if len(ruleset) == 0:
        raise TrainingError(
            f"no rules survived pruning ({len(harvested)} harvested; "
            f"support bounds [{config.prune.min_support}, {config.prune.max_support}])"
        )

    soft_all: list[SoftRule] | None = None
    if config.mode == "soft":
        soft_all = parallel_map(
            lambda r: soften(
                r, dataset.features, tol=config.firth.tol, max_iter=config.firth.max_iter
            ),
            ruleset.rules,
            threads=threads,
        )
        columns = soft_matrix(soft_all, dataset.features)
    else:
        columns = rule_matrix(ruleset.rules, dataset.features)

    # intercept-only softenings produce flat columns; the solver cannot see them
    keep = np.flatnonzero(columns.std(axis=0) > 0.0)
    if keep.size == 0:
        raise TrainingError("every rule column is constant after softening")
    if keep.size < len(ruleset):
        ruleset = RuleSet(tuple(ruleset.rules[i] for i in keep), ruleset.provenance)
        if soft_all is not None:
            soft_all = [soft_all[i] for i in keep]
        columns = columns[:, keep]

    curve = cv_select_lambda(
        columns,
        dataset.target,
        k=config.lasso.cv_folds,
        grid_size=config.lasso.grid_size,
        lambda_min_ratio=config.lasso.lambda_min_ratio,
        seed=config.isle.seed,
        threads=threads,
    )
    design, centered = standardize_design(columns, dataset.target)
    grid = curve.lambda_grid[curve.lambda_grid >= curve.selected_lambda]
    final = lasso_path(design, centered, lambda_grid=grid)[-1]

    weights = {
        rule.rule_id: float(w)
        for rule, w in zip(ruleset.rules, final.weights)
        if w != 0.0
    }
    soft_retained = None
    if soft_all is not None:
        soft_retained = tuple(
            s for s, rule in zip(soft_all, ruleset.rules) if rule.rule_id in weights
        )
    digest = hashlib.sha256(
        (config_digest(config) + dataset_digest(dataset)).encode()
    ).hexdigest()
    return RuleEnsembleModel(
        mode=config.mode,
        ruleset=ruleset,
        soft_rules=soft_retained,
        w0=final.w0,
        weights=weights,
        lambda_=final.lambda_,
        target_kind=dataset.target_kind,
        p=dataset.p,
        feature_names=dataset.feature_names,
        training_digest=digest,
    )


def predict(model: RuleEnsembleModel, features: np.ndarray) -> np.ndarray:
    """Scores for an (m, p) matrix: w0 plus the weighted retained columns.

    For binary targets the score ranks but is not a calibrated probability.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.p:
        raise ValueError(f"expected (m, {model.p}) features, got {features.shape}")
    retained = model.retained_rules()
    if not retained:
        return np.full(features.shape[0], model.w0)
    if model.mode == "soft":
        columns = soft_matrix(model.soft_rules, features)
    else:
        columns = rule_matrix(retained, features)
    w = np.array([model.weights[r.rule_id] for r in retained])
    return model.w0 + columns @ w


def rule_importance(model: RuleEnsembleModel, training_columns: np.ndarray) -> ImportanceReport:
    """|weight| times the training sd of each retained rule column.

    training_columns must align with model.ruleset.rules. Variable importance
    sums the importances of retained rules involving each feature.
    """
    training_columns = np.asarray(training_columns, dtype=np.float64)
    if training_columns.shape[1] != model.n_rules:
        raise ValueError("training_columns do not align with the rule set")
    sds = training_columns.std(axis=0)
    rule_imp: dict[str, float] = {}
    var_imp = np.zeros(model.p)
    for idx, rule in enumerate(model.ruleset.rules):
        w = model.weights.get(rule.rule_id)
        if w is None:
            continue
        imp = abs(w) * float(sds[idx])
        rule_imp[rule.rule_id] = imp
        for f in set(rule.features()):
            var_imp[f] += imp
    return ImportanceReport(rule_imp, var_imp)


# ---------------------------------------------------------------------------
# metrics


def metric_pearson(y, yhat) -> float:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ValueError("length mismatch")
    if y.std() == 0.0 or yhat.std() == 0.0:
        raise ValueError("pearson correlation undefined for a constant vector")
    return float(np.corrcoef(y, yhat)[0, 1])


def metric_rmse(y, yhat) -> float:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ValueError("length mismatch")
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def metric_auc(labels, scores) -> float:
    """Rank-statistic AUC; tied scores count half."""
    labels = np.asarray(labels, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape:
        raise ValueError("length mismatch")
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise ValueError("labels must be 0/1")
    n1 = int(labels.sum())
    n0 = labels.size - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[labels == 1.0].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


# ---------------------------------------------------------------------------
# cross-validation harness


@dataclass(frozen=True)
class FoldResult:
    fold: int
    n_test: int
    metrics: dict[str, float]
    n_rules: int
    n_active: int
    lambda_: float


@dataclass(frozen=True)
class CvReport:
    per_fold: tuple[FoldResult, ...]
    pooled: dict[str, float]
    mean: dict[str, float]
    oof_predictions: np.ndarray
    fold_of: np.ndarray


def _safe_metrics(y, yhat, target_kind) -> dict[str, float]:
    out: dict[str, float] = {}
    if target_kind == "binary":
        try:
            out["auc"] = metric_auc(y, yhat)
        except ValueError:
            out["auc"] = float("nan")
        out["rmse"] = metric_rmse(y, yhat)
    else:
        try:
            out["correlation"] = metric_pearson(y, yhat)
        except ValueError:
            out["correlation"] = float("nan")
        out["rmse"] = metric_rmse(y, yhat)
    return out


def cross_validate(
    dataset: Dataset, config: PipelineConfig, k: int, seed: int, threads: int = 1
) -> CvReport:
    """Train on k-1 folds, score the held-out fold, pool the predictions.

    The full pipeline (including penalty selection) runs inside each fold's
    training part, so held-out rows never leak into model choices. Pooled
    metrics are computed on the out-of-fold predictions; per-fold metrics and
    their means are reported alongside.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    folds = kfold(dataset.n, k, seed)
    oof = np.empty(dataset.n)
    results = []
    for fold in range(k):
        tr = folds.train_rows(fold)
        te = folds.test_rows(fold)
        model = train(dataset.subset(tr), config, threads=threads)
        preds = predict(model, dataset.features[te])
        oof[te] = preds
        results.append(
            FoldResult(
                fold=fold,
                n_test=int(te.size),
                metrics=_safe_metrics(dataset.target[te], preds, dataset.target_kind),
                n_rules=model.n_rules,
                n_active=model.n_active,
                lambda_=model.lambda_,
            )
        )
    pooled = _safe_metrics(dataset.target, oof, dataset.target_kind)
    names = results[0].metrics.keys()
    mean = {m: float(np.mean([r.metrics[m] for r in results])) for m in names}
    return CvReport(tuple(results), pooled, mean, oof, folds.fold_of)


# ---------------------------------------------------------------------------
# model file format


_RULE_LINE = re.compile(r"^(?P<rid>[^:]+): (?P<body>.+)$")
_COND = re.compile(r"^x(?P<f>\d+) in \((?P<lo>[^,]+), (?P<hi>[^\]]+)\]$")
_SOURCE = re.compile(r"^t(?P<tree>\d+)n(?P<node>\d+)$")


def _rule_to_text(rule: HardRule) -> str:
    return f"{rule.rule_id}: {rule.text()}"


def _rule_from_text(line: str) -> HardRule:
    m = _RULE_LINE.match(line)
    if m is None:
        raise ModelFormatError(f"bad rule line: {line!r}")
    rid = m.group("rid").strip()
    conds = []
    for part in m.group("body").split(" AND "):
        cm = _COND.match(part.strip())
        if cm is None:
            raise ModelFormatError(f"bad condition {part!r} in rule {rid!r}")
        lo = float(cm.group("lo"))
        hi = float(cm.group("hi"))
        conds.append(Condition(int(cm.group("f")), lo, hi))
    sm = _SOURCE.match(rid)
    source = (int(sm.group("tree")), int(sm.group("node"))) if sm else (-1, -1)
    return HardRule(tuple(conds), source, rid)


def _soft_to_text(s: SoftRule) -> str:
    theta = ",".join(repr(v) for v in s.theta)
    terms = ",".join(f"{t.feature}:{t.power}" for t in s.terms)
    stand = ",".join(f"{f}:{m!r}:{sd!r}" for f, m, sd in s.standardization)
    return (
        f"{s.rule_id}|aic={s.aic!r}|converged={int(s.converged)}"
        f"|iterations={s.iterations}|theta={theta}|terms={terms}|standardize={stand}"
    )


def _soft_from_text(line: str) -> SoftRule:
    parts = line.split("|")
    rid = parts[0]
    fields: dict[str, str] = {}
    for part in parts[1:]:
        key, _, value = part.partition("=")
        fields[key] = value
    try:
        theta = np.array([float(v) for v in fields["theta"].split(",")])
        terms = tuple(
            TermSpec(int(f), int(p))
            for f, p in (t.split(":") for t in fields["terms"].split(",") if t)
        )
        stand = tuple(
            (int(f), float(m), float(sd))
            for f, m, sd in (t.split(":") for t in fields["standardize"].split(",") if t)
        )
        return SoftRule(
            rule_id=rid,
            terms=terms,
            theta=theta,
            standardization=stand,
            aic=float(fields["aic"]),
            converged=bool(int(fields["converged"])),
            iterations=int(fields["iterations"]),
        )
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"bad soft rule line: {line!r}") from exc


def save_model(model: RuleEnsembleModel, path) -> None:
    """Write the versioned text format atomically (temp file + rename)."""
    lines = [MODEL_MAGIC, "[meta]"]
    lines.append(f"mode={model.mode}")
    lines.append(f"target_kind={model.target_kind}")
    lines.append(f"p={model.p}")
    lines.append(f"lambda={model.lambda_!r}")
    lines.append(f"w0={model.w0!r}")
    lines.append(f"provenance={model.ruleset.provenance}")
    lines.append(f"digest={model.training_digest}")
    lines.append("[features]")
    lines.extend(model.feature_names)
    lines.append("[rules]")
    lines.extend(_rule_to_text(r) for r in model.ruleset.rules)
    if model.mode == "soft":
        lines.append("[soft_rules]")
        lines.extend(_soft_to_text(s) for s in model.soft_rules)
    lines.append("[weights]")
    lines.extend(
        f"{r.rule_id}={model.weights[r.rule_id]!r}"
        for r in model.ruleset.rules
        if r.rule_id in model.weights
    )
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> RuleEnsembleModel:
    with open(path) as fh:
        raw = fh.read().splitlines()
    if not raw or raw[0] != MODEL_MAGIC:
        raise ModelFormatError(
            f"not a {MODEL_MAGIC!r} file: {path} (got {raw[0][:40]!r})"
            if raw
            else f"empty model file: {path}"
        )
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in raw[1:]:
        if line.startswith("[") and line.endswith("]"):
            current = sections.setdefault(line[1:-1], [])
        elif current is not None and line:
            current.append(line)
    for required in ("meta", "features", "rules", "weights"):
        if required not in sections:
            raise ModelFormatError(f"missing [{required}] section in {path}")
    meta = {}
    for line in sections["meta"]:
        key, _, value = line.partition("=")
        meta[key] = value
    mode = meta["mode"]
    rules = tuple(_rule_from_text(line) for line in sections["rules"])
    weights: dict[str, float] = {}
    for line in sections["weights"]:
        rid, _, value = line.partition("=")
        weights[rid] = float(value)
    soft_rules = None
    if mode == "soft":
        soft_rules = tuple(_soft_from_text(line) for line in sections.get("soft_rules", []))
    return RuleEnsembleModel(
        mode=mode,
        ruleset=RuleSet(rules, meta.get("provenance", "")),
        soft_rules=soft_rules,
        w0=float(meta["w0"]),
        weights=weights,
        lambda_=float(meta["lambda"]),
        target_kind=meta["target_kind"],
        p=int(meta["p"]),
        feature_names=tuple(sections["features"]),
        training_digest=meta.get("digest", ""),
    )
