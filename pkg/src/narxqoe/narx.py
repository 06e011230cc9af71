"""NARX network: topology, open/closed-loop evaluation, Jacobian, model files.

The network maps a lagged row ``x = [u(n); ...; u(n-d_u); y(n-1); ...; y(n-d_y)]``
to ``y_hat = w2 . tanh(W1 x + b1) + b2``. All arithmetic happens in the
normalized domain; reported estimates are mapped back to the MOS scale and
clipped to [1, 5].

Flattened parameter order (frozen, shared by Jacobians and model files):
``W1`` row-major, ``b1``, ``w2``, ``b2``.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import (
    MOS_MAX,
    MOS_MIN,
    FeatureSchema,
    Normalizer,
    QosRecord,
    feature_matrix,
    mos_vector,
    normalized_lagged,
)
from .errors import (
    DataError,
    FormatVersionError,
    MalformedModelError,
    ShapeError,
    ShapeInconsistencyError,
)
from .numerics import RNG_ALGORITHM, make_rng

FORMAT_VERSION = 1


@dataclass(frozen=True)
class NarxTopology:
    p: int
    d_u: int
    d_y: int
    hidden: int | None = None

    def __post_init__(self):
        if self.hidden is None:
            # one hidden node per exogenous input parameter
            object.__setattr__(self, "hidden", self.p)
        if self.p < 1 or self.d_u < 0 or self.d_y < 0 or self.hidden < 1:
            raise ValueError(f"invalid topology {self}")

    @property
    def input_width(self) -> int:
        return self.p * (self.d_u + 1) + self.d_y

    @property
    def warmup(self) -> int:
        return max(self.d_u, self.d_y)

    @property
    def n_weights(self) -> int:
        return self.hidden * self.input_width + 2 * self.hidden + 1


@dataclass
class NarxModel:
    topology: NarxTopology
    hidden_weights: np.ndarray
    hidden_bias: np.ndarray
    output_weights: np.ndarray
    output_bias: float
    normalizer: Normalizer | None = None
    schema: FeatureSchema | None = None
    seed: int = 0
    training: dict = field(default_factory=dict)

    def params(self) -> np.ndarray:
        return np.concatenate(
            [
                self.hidden_weights.ravel(),
                self.hidden_bias,
                self.output_weights,
                [self.output_bias],
            ]
        )

    def with_params(self, theta: np.ndarray) -> "NarxModel":
        t = self.topology
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (t.n_weights,):
            raise ShapeError(f"expected {t.n_weights} parameters, got {theta.shape}")
        h, w = t.hidden, t.input_width
        i = h * w
        return replace(
            self,
            hidden_weights=theta[:i].reshape(h, w).copy(),
            hidden_bias=theta[i:i + h].copy(),
            output_weights=theta[i + h:i + 2 * h].copy(),
            output_bias=float(theta[-1]),
            training=dict(self.training),
        )


def init_model(
    topology: NarxTopology,
    seed: int,
    normalizer: Normalizer | None = None,
    schema: FeatureSchema | None = None,
) -> NarxModel:
    """Uniform(+-1/sqrt(fan_in)) weights per layer, zero biases."""
    rng = make_rng(seed)
    h, w = topology.hidden, topology.input_width
    lim1 = 1.0 / math.sqrt(w)
    lim2 = 1.0 / math.sqrt(h)
    w1 = rng.uniform(-lim1, lim1, size=(h, w))
    w2 = rng.uniform(-lim2, lim2, size=h)
    return NarxModel(topology, w1, np.zeros(h), w2, 0.0, normalizer, schema, seed)


def _evaluate(model: NarxModel, x: np.ndarray) -> np.ndarray:
    """Outputs for rows of ``x`` with a fixed summation order.

    Pre-activations accumulate ``b1 + sum_j W1[:, j] x_j`` left to right, and
    the output ``b2 + sum_k w2_k h_k`` likewise, so a row gives bit-identical
    results whether evaluated alone or inside a batch.
    """
    w1 = model.hidden_weights
    acc = np.repeat(model.hidden_bias[None, :], x.shape[0], axis=0)
    for j in range(x.shape[1]):
        acc += x[:, j, None] * w1[:, j]
    hid = np.tanh(acc)
    out = np.full(x.shape[0], float(model.output_bias))
    for k in range(hid.shape[1]):
        out += hid[:, k] * model.output_weights[k]
    return out


def forward_sample(model: NarxModel, x: np.ndarray) -> float:
    """Network output for one lagged input row (normalized domain)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.topology.input_width,):
        raise ShapeError(
            f"input length {x.shape} does not match input width {model.topology.input_width}"
        )
    return float(_evaluate(model, x[None, :])[0])


def predict_batch(model: NarxModel, x: np.ndarray) -> np.ndarray:
    """Network outputs for a matrix of lagged rows (normalized domain)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.topology.input_width:
        raise ShapeError(f"input matrix {x.shape} does not match width {model.topology.input_width}")
    return _evaluate(model, x)


def to_mos(model: NarxModel, z) -> np.ndarray:
    """Map normalized outputs to the MOS scale and clip to [1, 5]."""
    return np.clip(_require_normalizer(model).inverse_target(z), MOS_MIN, MOS_MAX)


def _require_normalizer(model: NarxModel) -> Normalizer:
    if model.normalizer is None:
        raise ValueError("model has no normalizer; train it or attach one first")
    return model.normalizer


def _check_records(model: NarxModel, records: Sequence[QosRecord]) -> None:
    p = model.topology.p
    for r in records:
        if r.features.shape != (p,):
            raise DataError(f"record {r.ordinal} has {r.features.size} features, model expects {p}")


def forward_open_loop(model: NarxModel, records: Sequence[QosRecord]):
    """Teacher-forced estimates.

    Returns ``(ordinals, estimates)`` for every record with ordinal at least
    ``max(d_u, d_y)``; feedback slots hold the true MOS of earlier records.
    """
    _check_records(model, records)
    t = model.topology
    if t.d_y > 0 and np.isnan(mos_vector(records)).any():
        raise DataError("open-loop evaluation needs ground-truth MOS on every record")
    samples = normalized_lagged(records, _require_normalizer(model), t.d_u, t.d_y)
    return samples.origins, to_mos(model, predict_batch(model, samples.inputs))


def mlp_reference(model: NarxModel, records: Sequence[QosRecord]) -> np.ndarray:
    """Plain single-hidden-layer perceptron applied to each record's features.

    Only valid for ``d_u = d_y = 0``; used to check that the lag-free NARX
    reduces to an ordinary MLP.
    """
    if model.topology.d_u or model.topology.d_y:
        raise ValueError("MLP reference path requires d_u = d_y = 0")
    norm = _require_normalizer(model)
    w1, b1, w2 = model.hidden_weights, model.hidden_bias, model.output_weights
    out = []
    for z in norm.transform(feature_matrix(records)):
        pre = b1.copy()
        for j in range(z.size):
            pre = pre + w1[:, j] * z[j]
        act = np.tanh(pre)
        y = float(model.output_bias)
        for k in range(act.size):
            y = y + act[k] * w2[k]
        out.append(y)
    return np.clip(norm.inverse_target(np.array(out)), MOS_MIN, MOS_MAX)


class DelayBuffer:
    """Tapped delay lines for one stream.

    Holds the previous ``d_u`` input vectors and the previous ``d_y`` outputs,
    newest first. Output slots start at the normalized midpoint 0.
    """

    def __init__(self, d_u: int, d_y: int):
        self.d_u = d_u
        self.d_y = d_y
        self.inputs: deque[np.ndarray] = deque(maxlen=d_u)
        self.outputs: deque[float] = deque([0.0] * d_y, maxlen=d_y)

    @property
    def inputs_ready(self) -> bool:
        return len(self.inputs) == self.d_u

    def compose(self, u_now: np.ndarray) -> np.ndarray:
        return np.concatenate([u_now, *self.inputs, np.fromiter(self.outputs, float, self.d_y)])

    def push(self, u_now: np.ndarray, y_now: float) -> None:
        if self.d_u:
            self.inputs.appendleft(u_now)
        if self.d_y:
            self.outputs.appendleft(y_now)


def forward_closed_loop(
    model: NarxModel, records: Sequence[QosRecord], emit_from: int | None = None
):
    """Free-running estimates with the model's own outputs fed back.

    The recursion starts as soon as ``d_u`` past inputs exist; feedback slots
    without a prediction yet hold the normalized midpoint. Estimates are
    reported from ordinal ``emit_from`` (default ``max(d_u, d_y)``).
    Returns ``(ordinals, estimates)``.
    """
    _check_records(model, records)
    t = model.topology
    norm = _require_normalizer(model)
    start = t.warmup if emit_from is None else emit_from
    z = norm.transform(feature_matrix(records)) if records else np.empty((0, t.p))
    buf = DelayBuffer(t.d_u, t.d_y)
    ordinals, raw = [], []
    for n in range(len(records)):
        u = z[n]
        if buf.inputs_ready:
            y_hat = forward_sample(model, buf.compose(u))
            if n >= start:
                ordinals.append(n)
                raw.append(y_hat)
        else:
            y_hat = 0.0
        buf.push(u, y_hat)
    return np.array(ordinals, dtype=np.int64), to_mos(model, np.array(raw, dtype=np.float64))


def jacobian(model: NarxModel, x: np.ndarray) -> np.ndarray:
    """Derivatives of the output w.r.t. every parameter, one row per sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    t = model.topology
    if x.shape[1] != t.input_width:
        raise ShapeError(f"input matrix {x.shape} does not match width {t.input_width}")
    hid = np.tanh(x @ model.hidden_weights.T + model.hidden_bias)
    delta = (1.0 - hid * hid) * model.output_weights  # d y / d preactivation
    m = x.shape[0]
    jac = np.empty((m, t.n_weights))
    nw1 = t.hidden * t.input_width
    jac[:, :nw1] = (delta[:, :, None] * x[:, None, :]).reshape(m, nw1)
    jac[:, nw1:nw1 + t.hidden] = delta
    jac[:, nw1 + t.hidden:nw1 + 2 * t.hidden] = hid
    jac[:, -1] = 1.0
    return jac


# --------------------------------------------------------------------------- model files


def _fmt(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_fmt(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_fmt(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _fmt(v, indent + 1) for v in seq) + "\n" + "  " * indent + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return "null"
        text = format(v, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    return json.dumps(obj)


def model_to_dict(model: NarxModel) -> dict:
    t = model.topology
    return {
        "format_version": FORMAT_VERSION,
        "schema": model.schema.to_dict() if model.schema else None,
        "topology": {"p": t.p, "d_u": t.d_u, "d_y": t.d_y, "hidden": t.hidden},
        "normalizer": model.normalizer.to_dict() if model.normalizer else None,
        "weights": {
            "hidden_weights": model.hidden_weights,
            "hidden_bias": model.hidden_bias,
            "output_weights": model.output_weights,
            "output_bias": float(model.output_bias),
        },
        "seed": int(model.seed),
        "rng": RNG_ALGORITHM,
        "training": model.training,
    }


def save_model(model: NarxModel, path) -> None:
    Path(path).write_text(_fmt(model_to_dict(model)) + "\n", encoding="utf-8")


def load_model(path) -> NarxModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedModelError(f"{path}: not a valid model document ({exc})") from exc
    except OSError as exc:
        raise MalformedModelError(f"{path}: cannot read ({exc})") from exc
    if not isinstance(doc, dict):
        raise MalformedModelError(f"{path}: top level must be an object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatVersionError(
            f"{path}: format_version {doc.get('format_version')!r}, expected {FORMAT_VERSION}"
        )
    try:
        top = NarxTopology(**{k: int(doc["topology"][k]) for k in ("p", "d_u", "d_y", "hidden")})
        wts = doc["weights"]
        w1 = np.array(wts["hidden_weights"], dtype=np.float64)
        b1 = np.array(wts["hidden_bias"], dtype=np.float64)
        w2 = np.array(wts["output_weights"], dtype=np.float64)
        b2 = float(wts["output_bias"])
        schema = FeatureSchema.from_dict(doc["schema"]) if doc.get("schema") else None
        norm = Normalizer.from_dict(doc["normalizer"]) if doc.get("normalizer") else None
        seed = int(doc["seed"])
        training = doc.get("training") or {}
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedModelError(f"{path}: missing or invalid field ({exc})") from exc
    h, w = top.hidden, top.input_width
    if w1.shape != (h, w) or b1.shape != (h,) or w2.shape != (h,):
        raise ShapeInconsistencyError(
            f"{path}: weight shapes {w1.shape}, {b1.shape}, {w2.shape} inconsistent with "
            f"hidden={h}, input width={w}"
        )
    if schema is not None and len(schema) != top.p:
        raise ShapeInconsistencyError(f"{path}: schema has {len(schema)} names, topology p={top.p}")
    if norm is not None and norm.feature_min.shape != (top.p,):
        raise ShapeInconsistencyError(f"{path}: normalizer width does not match p={top.p}")
    params = np.concatenate([w1.ravel(), b1, w2, [b2]])
    if not np.all(np.isfinite(params)):
        raise MalformedModelError(f"{path}: non-finite weights")
    return NarxModel(top, w1, b1, w2, b2, norm, schema, seed, training)
