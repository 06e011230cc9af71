"""Comparison regressors: OLS, random forest, bagging, and forest feature selection."""
import numpy as np

from ..dataset import MOS_MAX, MOS_MIN
from .forest import (
    ForestConfig,
    ForestModel,
    ImportanceRanking,
    bagging_config,
    fit_forest,
    rank_features,
    select_features,
)
from .linear import LinearModel, fit_ols
from .tree import RegressionTree, build_tree


def predict(model, X) -> np.ndarray:
    """MOS estimates from any baseline, clipped to [1, 5]."""
    return np.clip(model.predict(X), MOS_MIN, MOS_MAX)


__all__ = [
    "ForestConfig",
    "ForestModel",
    "ImportanceRanking",
    "LinearModel",
    "RegressionTree",
    "bagging_config",
    "build_tree",
    "fit_forest",
    "fit_ols",
    "predict",
    "rank_features",
    "select_features",
]
