"""Bayesian-regularized Levenberg-Marquardt training with early stopping.

The objective is ``F = beta * E_D + alpha * E_W`` with ``E_D`` the sum of
squared residuals and ``E_W`` the sum of squared parameters. After each
accepted step, ``alpha`` and ``beta`` are re-estimated from the evidence
(MacKay / Foresee-Hagan update). Validation error picks the returned model.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dataset import (
    FeatureSchema,
    LaggedSamples,
    QosRecord,
    fit_normalizer,
    normalized_lagged,
    train_validation_split,
)
from .errors import DataError, DecompositionError, NumericalError
from .narx import NarxModel, NarxTopology, init_model, jacobian, predict_batch, to_mos
from .numerics import derive_seed, solve_spd, spd_inverse_trace


@dataclass
class TrainConfig:
    max_epochs: int = 300
    patience: int = 30
    mu0: float = 1e-3
    mu_inc: float = 10.0
    mu_dec: float = 0.1
    mu_max: float = 1e10
    alpha0: float = 0.0
    beta0: float = 1.0
    #: re-estimate alpha/beta after every accepted step; off keeps them at alpha0/beta0
    evidence_updates: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1 or self.patience < 1 or self.patience > self.max_epochs:
            raise ValueError("need 1 <= patience <= max_epochs")
        if not (self.mu0 > 0 and self.mu_inc > 1 and 0 < self.mu_dec < 1 and self.mu_max > self.mu0):
            raise ValueError("invalid damping schedule")
        if self.alpha0 < 0 or self.beta0 <= 0:
            raise ValueError("alpha0 must be >= 0 and beta0 > 0")


@dataclass
class EpochStats:
    epoch: int
    train_mse: float
    val_mse: float
    test_mse: float
    alpha: float
    beta: float
    gamma: float
    mu: float
    objective: float


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    stop_epoch: int = 0
    stop_reason: str = ""
    #: (objective before, objective after) for every accepted step, same alpha/beta
    accepted_steps: list[tuple[float, float]] = field(default_factory=list)

    @property
    def best(self) -> EpochStats:
        return self.epochs[self.best_epoch]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_mse", "val_mse", "test_mse", "alpha", "beta", "gamma", "mu"])
            for e in self.epochs:
                w.writerow(
                    [e.epoch]
                    + [repr(float(v)) for v in (e.train_mse, e.val_mse, e.test_mse, e.alpha, e.beta, e.gamma, e.mu)]
                )


def sample_mse(model: NarxModel, samples: LaggedSamples) -> float:
    """MSE on the MOS scale of clipped estimates for normalized samples."""
    if len(samples) == 0:
        return float("nan")
    est = to_mos(model, predict_batch(model, samples.inputs))
    truth = model.normalizer.inverse_target(samples.targets)
    return float(np.mean((est - truth) ** 2))


def effective_parameters(model: NarxModel, alpha: float, beta: float, samples: LaggedSamples) -> float:
    """Number of well-determined parameters ``N_w - alpha * tr((beta J'J + alpha I)^-1)``."""
    if alpha < 0 or beta <= 0:
        raise ValueError("need alpha >= 0 and beta > 0")
    jac = jacobian(model, samples.inputs)
    return _gamma(jac.T @ jac, alpha, beta)


def _gamma(jtj: np.ndarray, alpha: float, beta: float) -> float:
    n_w = jtj.shape[0]
    if alpha == 0.0:
        return float(n_w)
    a = beta * jtj + alpha * np.eye(n_w)
    gamma = n_w - alpha * spd_inverse_trace(a)
    return float(min(max(gamma, 0.0), n_w))


def train(
    model: NarxModel,
    train_samples: LaggedSamples,
    val_samples: LaggedSamples,
    config: TrainConfig | None = None,
    test_samples: LaggedSamples | None = None,
) -> tuple[NarxModel, TrainReport]:
    cfg = config or TrainConfig()
    if len(train_samples) == 0 or len(val_samples) == 0:
        raise DataError("training and validation sets must be non-empty")
    if np.intersect1d(train_samples.origins, val_samples.origins).size:
        raise DataError("training and validation samples share origin records")

    x, t = train_samples.inputs, train_samples.targets
    n_samples = len(t)
    theta = model.params()
    n_w = theta.size
    eye = np.eye(n_w)
    alpha, beta, mu = cfg.alpha0, cfg.beta0, cfg.mu0

    def residuals(th):
        return predict_batch(model.with_params(th), x) - t

    def stats(th, epoch, gamma, objective):
        m = model.with_params(th)
        return EpochStats(
            epoch,
            sample_mse(m, train_samples),
            sample_mse(m, val_samples),
            sample_mse(m, test_samples) if test_samples is not None else float("nan"),
            alpha, beta, gamma, mu, objective,
        )

    r = residuals(theta)
    e_d, e_w = float(r @ r), float(theta @ theta)
    f_cur = beta * e_d + alpha * e_w
    if not math.isfinite(f_cur):
        raise NumericalError("non-finite objective at initialization")
    jac = jacobian(model.with_params(theta), x)
    jtj = jac.T @ jac
    gamma = _gamma(jtj, alpha, beta)

    report = TrainReport()
    report.epochs.append(stats(theta, 0, gamma, f_cur))
    best_val, best_theta, since_best = report.epochs[0].val_mse, theta.copy(), 0
    report.stop_reason = "max_epochs"

    for epoch in range(1, cfg.max_epochs + 1):
        grad = beta * (jac.T @ r) + alpha * theta
        accepted = False
        while mu <= cfg.mu_max:
            try:
                step = -solve_spd(beta * jtj + (alpha + mu) * eye, grad)
            except DecompositionError:
                mu *= cfg.mu_inc
                continue
            cand = theta + step
            r_new = residuals(cand)
            e_d_new, e_w_new = float(r_new @ r_new), float(cand @ cand)
            f_new = beta * e_d_new + alpha * e_w_new
            if math.isfinite(f_new) and f_new < f_cur:
                report.accepted_steps.append((f_cur, f_new))
                theta, r, e_d, e_w = cand, r_new, e_d_new, e_w_new
                mu *= cfg.mu_dec
                accepted = True
                break
            mu *= cfg.mu_inc
        if not accepted:
            report.stop_reason = "mu_max"
            report.stop_epoch = epoch - 1
            break

        jac = jacobian(model.with_params(theta), x)
        jtj = jac.T @ jac
        if cfg.evidence_updates:
            gamma = _gamma(jtj, alpha, beta)
            if e_w > 0:
                alpha = gamma / (2.0 * e_w)
            if e_d > 0 and n_samples - gamma > 0:
                beta = (n_samples - gamma) / (2.0 * e_d)
        else:
            gamma = _gamma(jtj, alpha, beta)
        f_cur = beta * e_d + alpha * e_w
        if not math.isfinite(f_cur):
            raise NumericalError(
                f"non-finite objective at epoch {epoch} (E_D={e_d}, E_W={e_w}, alpha={alpha}, beta={beta})"
            )

        ep = stats(theta, epoch, gamma, f_cur)
        report.epochs.append(ep)
        report.stop_epoch = epoch
        if ep.val_mse < best_val:
            best_val, best_theta, since_best = ep.val_mse, theta.copy(), 0
            report.best_epoch = epoch
        else:
            since_best += 1
            if since_best >= cfg.patience:
                report.stop_reason = "patience"
                break

    best = model.with_params(best_theta)
    b = report.best
    best.training = {
        "epochs_run": report.stop_epoch,
        "best_epoch": report.best_epoch,
        "stop_reason": report.stop_reason,
        "train_mse": b.train_mse,
        "val_mse": b.val_mse,
        "alpha": b.alpha,
        "beta": b.beta,
        "gamma": b.gamma,
        "objective": b.objective,
        "n_train": int(len(train_samples)),
        "n_val": int(len(val_samples)),
    }
    return best, report


@dataclass
class FitResult:
    model: NarxModel
    report: TrainReport
    train_origins: np.ndarray
    val_origins: np.ndarray


def fit_on_records(
    records: Sequence[QosRecord],
    train_ordinals,
    schema: FeatureSchema,
    d_u: int,
    d_y: int,
    hidden: int | None = None,
    config: TrainConfig | None = None,
    test_ordinals=None,
) -> FitResult:
    """Normalize on the training rows, lag, split 70/30 and train.

    Lagging runs over the whole sequence before samples are picked by origin,
    so feedback/input slots may reference rows outside ``train_ordinals``.
    """
    cfg = config or TrainConfig()
    train_ordinals = np.sort(np.asarray(train_ordinals, dtype=np.int64))
    norm = fit_normalizer(records, train_ordinals)
    topo = NarxTopology(len(schema), d_u, d_y, hidden)
    samples = normalized_lagged(records, norm, d_u, d_y)
    pool = samples.select_origins(train_ordinals)
    tr_pos, va_pos = train_validation_split(len(pool), derive_seed(cfg.seed, "split"))
    tr, va = pool.take(tr_pos), pool.take(va_pos)
    te = samples.select_origins(test_ordinals) if test_ordinals is not None else None
    model = init_model(topo, derive_seed(cfg.seed, "init"), norm, schema)
    model.seed = cfg.seed
    trained, report = train(model, tr, va, cfg, te)
    trained.training["config"] = asdict(cfg)
    return FitResult(trained, report, tr.origins, va.origins)
