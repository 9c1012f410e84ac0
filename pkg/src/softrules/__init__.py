"""softrules: rule ensembles with hard or smooth (logistic) rules.

Pipeline: subsampled least-squares trees -> conjunctive rules -> optional
logistic softening with AIC term selection -> sparse L1 combination weights
chosen by cross-validation.
"""

__version__ = "0.1.0"

from .data import ColumnStats, DataError, Dataset, FoldAssignment, column_stats, kfold, load_csv, write_csv
from .datagen import gen_friedman1, gen_friedman2
from .firth import FirthFit, LogisticDesign, fit_firth
from .isle import IsleConfig, IsleEnsemble, generate_ensemble
from .lasso import CvCurve, LassoFit, cv_select_lambda, fit_lasso, lasso_path
from .model import (
    CvReport,
    FirthParams,
    ImportanceReport,
    LassoParams,
    ModelFormatError,
    PipelineConfig,
    PruneParams,
    RuleEnsembleModel,
    TrainingError,
    cross_validate,
    load_model,
    metric_auc,
    metric_pearson,
    metric_rmse,
    predict,
    rule_importance,
    save_model,
    train,
)
from .rules import Condition, HardRule, RuleSet, dedupe_and_prune, evaluate_rule, extract_rules, rule_matrix
from .soft import SoftRule, TermSpec, best_subset_aic, candidate_terms, evaluate_soft, soft_matrix, soften
from .tree import RegressionTree, TreeNode, best_split, fit_tree, predict_tree

__all__ = [name for name in dir() if not name.startswith("_")]
