"""Ordinary least squares through the normal equations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, DecompositionError, NumericalError, ShapeError
from ..numerics import solve_spd

JITTER = 1e-10


@dataclass
class LinearModel:
    weights: np.ndarray
    intercept: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.weights.size:
            raise ShapeError(f"linear model expects {self.weights.size} features, got shape {X.shape}")
        return X @ self.weights + self.intercept


def fit_ols(X: np.ndarray, y: np.ndarray) -> LinearModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n < p + 1:
        raise DataError(f"OLS with {p} features needs at least {p + 1} samples, got {n}")
    A = np.hstack([X, np.ones((n, 1))])
    gram = A.T @ A
    rhs = A.T @ y
    try:
        coef = solve_spd(gram, rhs)
    except DecompositionError:
        # tied / collinear columns: retry with a tiny ridge scaled to the diagonal
        bump = JITTER * max(float(np.max(np.diag(gram))), 1.0)
        try:
            coef = solve_spd(gram + bump * np.eye(p + 1), rhs)
        except DecompositionError as exc:
            raise NumericalError(f"design matrix is rank deficient: {exc}") from exc
    return LinearModel(coef[:p], float(coef[p]))
