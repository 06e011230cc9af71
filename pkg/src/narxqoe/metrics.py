"""MSE / Pearson R and the k-fold evaluation harness."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import FoldPlan, QosRecord, mos_vector
from .errors import NarxError, ShapeError, UndefinedCorrelationError
from .numerics import derive_seed


def _pair(pred, target) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ShapeError(f"length mismatch: {p.size} predictions vs {t.size} targets")
    if p.size == 0:
        raise ShapeError("cannot score empty vectors")
    return p, t


def mse(pred, target) -> float:
    p, t = _pair(pred, target)
    d = p - t
    return float(np.mean(d * d))


def rmse(pred, target) -> float:
    return math.sqrt(mse(pred, target))


def pearson(pred, target) -> float:
    """Sample Pearson correlation; raises for constant input instead of returning 0."""
    p, t = _pair(pred, target)
    if p.size < 2:
        raise UndefinedCorrelationError("correlation needs at least 2 pairs")
    dp = p - p.mean()
    dt = t - t.mean()
    spp = float(dp @ dp)
    stt = float(dt @ dt)
    if spp == 0.0 or stt == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant vector")
    r = float(dp @ dt) / math.sqrt(spp * stt)
    return min(1.0, max(-1.0, r))


@dataclass
class FoldMetrics:
    fold: int | str
    n: int
    mse: float
    rmse: float
    pearson: float

    @classmethod
    def score(cls, fold, pred, target) -> "FoldMetrics":
        m = mse(pred, target)
        return cls(fold, int(np.size(pred)), m, math.sqrt(m), pearson(pred, target))


@dataclass
class FoldOutcome:
    """What one model produced on one fold."""

    origins: np.ndarray
    estimates: np.ndarray
    #: ordinals of every record whose target was used for fitting (train + validation)
    fit_origins: np.ndarray
    extra: dict = field(default_factory=dict)


@dataclass
class EvalReport:
    model: str
    mode: str
    plan_digest: str
    folds: list[FoldMetrics]
    aggregate: FoldMetrics
    origins: np.ndarray
    estimates: np.ndarray
    targets: np.ndarray
    fold_of: np.ndarray
    fit_origins: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def leakage(self, plan: FoldPlan) -> int:
        """Count of fold-test records that were also used to fit that fold's model."""
        return sum(
            int(np.intersect1d(self.fit_origins[f], plan.test_indices(f)).size) for f in self.fit_origins
        )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fold", "n", "mse", "rmse", "pearson"])
            for fm in [*self.folds, self.aggregate]:
                w.writerow([fm.fold, fm.n, repr(fm.mse), repr(fm.rmse), repr(fm.pearson)])

    def write_predictions(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ordinal", "fold", "estimate", "target"])
            for o, f, e, t in zip(self.origins, self.fold_of, self.estimates, self.targets):
                w.writerow([int(o), int(f), repr(float(e)), repr(float(t))])

    def summary(self) -> dict:
        return {
            "model": self.model,
            "mode": self.mode,
            "plan": self.plan_digest,
            "mse": self.aggregate.mse,
            "rmse": self.aggregate.rmse,
            "pearson": self.aggregate.pearson,
            "n": self.aggregate.n,
            "folds": [vars(f) for f in self.folds],
        }


class FoldError(NarxError):
    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"fold {fold} failed: {cause}")
        self.fold = fold
        self.cause = cause


def evaluate_cv(
    spec, records: Sequence[QosRecord], plan: FoldPlan, seed: int = 0, mode: str = "open"
) -> EvalReport:
    """Train ``spec`` on each fold's remainder and score the held-out fold.

    ``spec`` provides ``name`` and ``fit_predict(records, train, test, seed, mode)``
    returning a :class:`FoldOutcome`. The aggregate row pools every
    (estimate, target) pair across folds.
    """
    if plan.assignments.size != len(records):
        raise ShapeError(f"fold plan covers {plan.assignments.size} records, data has {len(records)}")
    y = mos_vector(records)
    folds, fit_origins = [], {}
    all_o, all_e, all_f = [], [], []
    for f in range(plan.k):
        test, train = plan.test_indices(f), plan.train_indices(f)
        try:
            out = spec.fit_predict(records, train, test, spec_seed(seed, spec.name, f), mode)
            if not np.isin(out.origins, test).all():
                raise ShapeError("model returned estimates for records outside the test fold")
            folds.append(FoldMetrics.score(f, out.estimates, y[out.origins]))
        except Exception as exc:
            raise FoldError(f, exc) from exc
        fit_origins[f] = np.asarray(out.fit_origins, dtype=np.int64)
        all_o.append(out.origins)
        all_e.append(out.estimates)
        all_f.append(np.full(out.origins.size, f))
    origins = np.concatenate(all_o)
    estimates = np.concatenate(all_e)
    targets = y[origins]
    return EvalReport(
        spec.name,
        mode,
        plan.digest,
        folds,
        FoldMetrics.score("all", estimates, targets),
        origins,
        estimates,
        targets,
        np.concatenate(all_f),
        fit_origins,
    )


def spec_seed(root: int, name: str, fold: int) -> int:
    return derive_seed(root, "model:" + name, fold)
