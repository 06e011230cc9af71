"""Model specs for the comparison harness.

A spec is anything with a ``name`` and a
``fit_predict(records, train, test, seed, mode) -> FoldOutcome`` method.
Spec strings: ``narx(d_u,d_y)``, ``narx(d_u,d_y,hidden)``, ``mlp``, ``ols``,
``rf``, ``bagging``; ``oracle`` is a test hook that echoes the targets.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .baselines import ForestConfig, bagging_config, fit_forest, fit_ols, predict
from .dataset import FeatureSchema, feature_matrix, mos_vector
from .metrics import FoldOutcome
from .narx import forward_closed_loop, forward_open_loop
from .training import TrainConfig, fit_on_records


@dataclass
class NarxSpec:
    d_u: int
    d_y: int
    hidden: int | None = None
    schema: FeatureSchema | None = None
    train_config: TrainConfig = field(default_factory=TrainConfig)
    label: str | None = None

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        h = "" if self.hidden is None else f",{self.hidden}"
        return f"narx({self.d_u},{self.d_y}{h})"

    def fit_predict(self, records, train, test, seed, mode):
        schema = self.schema or FeatureSchema(tuple(f"x{i}" for i in range(records[0].features.size)))
        cfg = TrainConfig(**{**vars(self.train_config), "seed": seed})
        fit = fit_on_records(records, train, schema, self.d_u, self.d_y, self.hidden, cfg)
        if mode == "open":
            origins, est = forward_open_loop(fit.model, records)
        elif mode == "closed":
            origins, est = forward_closed_loop(fit.model, records)
        else:
            raise ValueError(f"unknown loop mode {mode!r}")
        keep = np.isin(origins, test)
        return FoldOutcome(
            origins[keep],
            est[keep],
            np.concatenate([fit.train_origins, fit.val_origins]),
            {"model": fit.model, "report": fit.report},
        )


@dataclass
class ForestSpec:
    config: ForestConfig = field(default_factory=ForestConfig)
    label: str = "rf"

    @property
    def name(self) -> str:
        return self.label

    def fit_predict(self, records, train, test, seed, mode):
        x, y = feature_matrix(records), mos_vector(records)
        cfg = ForestConfig(**{**vars(self.config), "seed": seed})
        model = fit_forest(x[train], y[train], cfg)
        return FoldOutcome(np.asarray(test), predict(model, x[test]), np.asarray(train))


@dataclass
class OlsSpec:
    name: str = "ols"

    def fit_predict(self, records, train, test, seed, mode):
        x, y = feature_matrix(records), mos_vector(records)
        model = fit_ols(x[train], y[train])
        return FoldOutcome(np.asarray(test), predict(model, x[test]), np.asarray(train))


@dataclass
class OracleSpec:
    """Echoes the true MOS; checks the harness plumbing."""

    name: str = "oracle"

    def fit_predict(self, records, train, test, seed, mode):
        return FoldOutcome(np.asarray(test), mos_vector(records)[test], np.asarray(train))


@dataclass
class ConstantSpec:
    value: float = 3.0
    name: str = "constant"

    def fit_predict(self, records, train, test, seed, mode):
        return FoldOutcome(np.asarray(test), np.full(len(test), self.value), np.asarray(train))


_NARX = re.compile(r"^narx\((\d+),(\d+)(?:,(\d+))?\)$")


def parse_spec_list(text: str) -> list[str]:
    """Split ``"narx(3,3),rf,mlp"`` on commas outside parentheses."""
    out, depth, cur = [], 0, ""
    for ch in text.replace(" ", ""):
        depth += ch == "("
        depth -= ch == ")"
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    if cur:
        out.append(cur)
    return [s for s in out if s]


def make_spec(
    text: str,
    schema: FeatureSchema | None = None,
    train_config: TrainConfig | None = None,
    hidden: int | None = None,
    forest: ForestConfig | None = None,
):
    text = text.strip().lower()
    tc = train_config or TrainConfig()
    m = _NARX.match(text)
    if m:
        h = int(m.group(3)) if m.group(3) else hidden
        return NarxSpec(int(m.group(1)), int(m.group(2)), h, schema, tc)
    if text == "mlp":
        return NarxSpec(0, 0, hidden, schema, tc, label="mlp")
    if text == "ols":
        return OlsSpec()
    base = vars(forest) if forest is not None else {}
    if text == "rf":
        return ForestSpec(ForestConfig(**base), "rf")
    if text == "bagging":
        return ForestSpec(bagging_config(**{k: v for k, v in base.items() if k != "m_try"}), "bagging")
    if text == "oracle":
        return OracleSpec()
    raise ValueError(f"unknown model spec {text!r}")
