"""Random forest and bagging regressors with impurity-decrease importance."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ..dataset import FeatureSchema, Table
from ..errors import DataError, ShapeError
from ..numerics import derive_seed, make_rng
from .tree import RegressionTree, build_tree


@dataclass
class ForestConfig:
    n_trees: int = 100
    #: features tried per split; None means ceil(p/3), "all" means p (bagging)
    m_try: int | str | None = None
    bootstrap: bool = True
    min_samples_leaf: int = 5
    max_depth: int | None = None
    seed: int = 0

    def resolve_m_try(self, p: int) -> int:
        if self.m_try == "all":
            return p
        m = math.ceil(p / 3) if self.m_try is None else self.m_try
        if not 1 <= m <= p:
            raise ValueError(f"m_try={m} must lie in [1, {p}]")
        return m


def bagging_config(**kw) -> ForestConfig:
    """Bagging is a forest that considers every feature at every split."""
    kw.setdefault("m_try", "all")
    return ForestConfig(**kw)


@dataclass
class ForestModel:
    trees: list[RegressionTree]
    n_features: int
    config: ForestConfig

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"forest expects {self.n_features} features, got shape {X.shape}")
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += tree.predict(X)
        return acc / len(self.trees)

    def feature_importances(self) -> np.ndarray:
        total = np.zeros(self.n_features)
        for tree in self.trees:
            total += tree.importance
        s = total.sum()
        return total / s if s > 0 else total


def fit_forest(X: np.ndarray, y: np.ndarray, config: ForestConfig | None = None) -> ForestModel:
    """Grow ``n_trees`` CART trees; tree ``i`` draws from seed ``derive_seed(seed, "tree", i)``."""
    cfg = config or ForestConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    if cfg.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if n < 2 * cfg.min_samples_leaf:
        raise DataError(f"need at least {2 * cfg.min_samples_leaf} samples, got {n}")
    m_try = cfg.resolve_m_try(p)
    trees = []
    for i in range(cfg.n_trees):
        rng = make_rng(derive_seed(cfg.seed, "tree", i))
        rows = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        trees.append(build_tree(X, y, rows.astype(np.int64), rng, m_try, cfg.min_samples_leaf, cfg.max_depth))
    return ForestModel(trees, p, cfg)


@dataclass
class ImportanceRanking:
    features: list[str]
    scores: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "feature", "score"])
            for rank, (name, score) in enumerate(zip(self.features, self.scores), start=1):
                w.writerow([rank, name, repr(float(score))])


def rank_features(names, importances) -> ImportanceRanking:
    # descending score, ties keep column order
    order = sorted(range(len(names)), key=lambda i: (-importances[i], i))
    return ImportanceRanking([names[i] for i in order], np.asarray(importances)[order])


def select_features(
    table: Table, config: ForestConfig | None = None, top_k: int = 9, target: str = "mos"
) -> tuple[FeatureSchema, ImportanceRanking]:
    """Keep the ``top_k`` columns by forest importance."""
    if not 1 <= top_k <= len(table.columns):
        raise DataError(f"top_k={top_k} must lie in [1, {len(table.columns)}]")
    forest = fit_forest(table.values, table.target, config)
    ranking = rank_features(table.columns, forest.feature_importances())
    return FeatureSchema(tuple(ranking.features[:top_k]), target), ranking
