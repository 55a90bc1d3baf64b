"""Causal pre-processing, fairness-penalised boosting and trade-off evaluation."""

from .boost import BoostModel, BoostParams, predict_proba, train
from .dataset import Dataset, SplitSpec, load_csv, save_csv, split
from .metrics import auc, auc_ci, base_rate_gap, disparity, fairness_panel
from .scm import ScmSpec, WorldKind, default_spec, paired_worlds, simulate, validate_dag
from .tradeoff import find_lambda_star, relation_direction, tradeoff_curve

__version__ = "0.1.0"

__all__ = [
    "BoostModel", "BoostParams", "Dataset", "ScmSpec", "SplitSpec", "WorldKind",
    "auc", "auc_ci", "base_rate_gap", "default_spec", "disparity", "fairness_panel",
    "find_lambda_star", "load_csv", "paired_worlds", "predict_proba", "relation_direction",
    "save_csv", "simulate", "split", "tradeoff_curve", "train", "validate_dag",
]
