"""Record ingestion, feature scaling, lagged-sample assembly and fold plans."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DataError, ShapeError
from .numerics import make_rng

MOS_MIN, MOS_MAX = 1.0, 5.0

#: The nine bitstream parameters the reference study kept after selection.
CANONICAL_FEATURES = (
    "aFrameCount",
    "pFrameCountDiff",
    "s2PFrameCountDiff",
    "s3PFrameMeanDiff",
    "s10PFrameMeanDiff",
    "audioNbFrames",
    "audioBitRate",
    "videoBitRate",
    "videoPacketLossRate",
)


def column_key(name: str) -> str:
    """Matching key for header names: case-insensitive, whitespace removed."""
    return re.sub(r"\s+", "", name).lower()


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple[str, ...]
    target: str = "mos"

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if not self.names:
            raise DataError("feature schema must name at least one column")
        keys = [column_key(n) for n in self.names]
        if len(set(keys)) != len(keys):
            raise DataError(f"duplicate feature names in schema: {list(self.names)}")
        if column_key(self.target) in keys:
            raise DataError(f"target column {self.target!r} is also listed as a feature")

    def __len__(self) -> int:
        return len(self.names)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "target": self.target}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(tuple(d["names"]), d.get("target", "mos"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FeatureSchema":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"cannot read schema file {path}: {exc}") from exc


CANONICAL_SCHEMA = FeatureSchema(CANONICAL_FEATURES)
SYNTH_SCHEMA = FeatureSchema(("u1", "u2"))


@dataclass(frozen=True)
class QosRecord:
    ordinal: int
    features: np.ndarray
    mos: float | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1 or not np.all(np.isfinite(feats)):
            raise DataError(f"record {self.ordinal}: features must be a finite vector")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        if self.mos is not None:
            mos = float(self.mos)
            if not (MOS_MIN <= mos <= MOS_MAX):
                raise DataError(f"record {self.ordinal}: MOS {mos} outside [1, 5]")
            object.__setattr__(self, "mos", mos)


def feature_matrix(records: Sequence[QosRecord]) -> np.ndarray:
    if not records:
        return np.empty((0, 0))
    return np.vstack([r.features for r in records])


def mos_vector(records: Sequence[QosRecord]) -> np.ndarray:
    """MOS values as floats; missing entries become NaN."""
    return np.array([np.nan if r.mos is None else r.mos for r in records], dtype=np.float64)


def _parse_cell(text: str, column: str, row: int) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise DataError(f"row {row}: cannot parse {text!r} in column {column!r}") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}: non-finite value {text!r} in column {column!r}")
    return value


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = [row for row in reader if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    return header, rows


def _column_index(header: list[str], name: str) -> int | None:
    keys = [column_key(h) for h in header]
    try:
        return keys.index(column_key(name))
    except ValueError:
        return None


def load_csv(path, schema: FeatureSchema, order_by: str | None = None) -> list[QosRecord]:
    """Read records from a headed CSV file.

    Records come back in file order, or sorted ascending (stable) by the
    ``order_by`` column. Ordinals are assigned after ordering. The target
    column is optional; when absent, records carry no MOS.
    """
    header, rows = _read_rows(path)
    cols = []
    for name in schema.names:
        idx = _column_index(header, name)
        if idx is None:
            raise DataError(f"{path}: missing column {name!r}")
        cols.append(idx)
    target_idx = _column_index(header, schema.target)
    order_idx = None
    if order_by is not None:
        order_idx = _column_index(header, order_by)
        if order_idx is None:
            raise DataError(f"{path}: missing order-by column {order_by!r}")

    parsed = []
    for rownum, row in enumerate(rows, start=1):
        if len(row) < len(header):
            raise DataError(f"row {rownum}: expected {len(header)} cells, found {len(row)}")
        feats = [_parse_cell(row[i], header[i], rownum) for i in cols]
        mos = None
        if target_idx is not None and row[target_idx].strip() != "":
            mos = _parse_cell(row[target_idx], header[target_idx], rownum)
            if not (MOS_MIN <= mos <= MOS_MAX):
                raise DataError(f"row {rownum}: MOS {mos} outside [1, 5]")
        key = _parse_cell(row[order_idx], header[order_idx], rownum) if order_idx is not None else 0.0
        parsed.append((key, feats, mos))
    if order_idx is not None:
        parsed.sort(key=lambda t: t[0])  # list.sort is stable
    return [QosRecord(i, np.array(f), m) for i, (_, f, m) in enumerate(parsed)]


@dataclass
class Table:
    """All numeric columns of a wide CSV, used for feature selection."""

    columns: list[str]
    values: np.ndarray
    target: np.ndarray


def load_table(path, target: str = "mos", exclude: Sequence[str] = ()) -> Table:
    header, rows = _read_rows(path)
    t_idx = _column_index(header, target)
    if t_idx is None:
        raise DataError(f"{path}: missing target column {target!r}")
    skip = {column_key(target), *(column_key(e) for e in exclude)}
    use = [i for i, h in enumerate(header) if column_key(h) not in skip]
    values = np.empty((len(rows), len(use)))
    mos = np.empty(len(rows))
    for r, row in enumerate(rows, start=1):
        if len(row) < len(header):
            raise DataError(f"row {r}: expected {len(header)} cells, found {len(row)}")
        for j, i in enumerate(use):
            try:
                values[r - 1, j] = _parse_cell(row[i], header[i], r)
            except DataError as exc:
                raise DataError(f"non-numeric column {header[i]!r}: {exc}") from None
        mos[r - 1] = _parse_cell(row[t_idx], header[t_idx], r)
    return Table([header[i] for i in use], values, mos)


def write_records_csv(records: Sequence[QosRecord], schema: FeatureSchema, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*schema.names, schema.target])
        for r in records:
            w.writerow([repr(float(v)) for v in r.features] + ["" if r.mos is None else repr(r.mos)])


# --------------------------------------------------------------------------- scaling


def _affine_fwd(x, lo, hi):
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, 2.0 * (x - lo) / safe - 1.0, 0.0)


def _affine_inv(z, lo, hi):
    return (z + 1.0) * 0.5 * (hi - lo) + lo


@dataclass
class Normalizer:
    """Per-column min/max scaling to [-1, 1]; constant columns map to 0."""

    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float = MOS_MIN
    target_max: float = MOS_MAX

    def transform(self, x: np.ndarray) -> np.ndarray:
        return _affine_fwd(np.asarray(x, dtype=np.float64), self.feature_min, self.feature_max)

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return _affine_inv(np.asarray(z, dtype=np.float64), self.feature_min, self.feature_max)

    def transform_target(self, y):
        return _affine_fwd(np.asarray(y, dtype=np.float64), self.target_min, self.target_max)

    def inverse_target(self, z):
        return _affine_inv(np.asarray(z, dtype=np.float64), self.target_min, self.target_max)

    def to_dict(self) -> dict:
        return {
            "feature_min": [float(v) for v in self.feature_min],
            "feature_max": [float(v) for v in self.feature_max],
            "target_min": float(self.target_min),
            "target_max": float(self.target_max),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(
            np.array(d["feature_min"], dtype=np.float64),
            np.array(d["feature_max"], dtype=np.float64),
            float(d["target_min"]),
            float(d["target_max"]),
        )


def fit_normalizer(records: Sequence[QosRecord], indices) -> Normalizer:
    """Fit scaling statistics on the given training rows only."""
    idx = np.asarray(list(indices), dtype=np.int64)
    if idx.size == 0:
        raise DataError("cannot fit a normalizer on an empty row set")
    rows = [records[i] for i in idx]
    x = feature_matrix(rows)
    y = mos_vector(rows)
    y = y[np.isfinite(y)]
    tmin, tmax = (float(y.min()), float(y.max())) if y.size else (MOS_MIN, MOS_MAX)
    return Normalizer(x.min(axis=0), x.max(axis=0), tmin, tmax)


# --------------------------------------------------------------------------- lagging


@dataclass(frozen=True)
class LaggedSample:
    input: np.ndarray
    target: float
    origin: int


@dataclass
class LaggedSamples:
    """A batch of lagged samples stored row-wise.

    Row layout is ``[u(n); u(n-1); ...; u(n-d_u); y(n-1); ...; y(n-d_y)]``.
    """

    inputs: np.ndarray
    targets: np.ndarray
    origins: np.ndarray
    d_u: int
    d_y: int

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def __getitem__(self, i: int) -> LaggedSample:
        return LaggedSample(self.inputs[i], float(self.targets[i]), int(self.origins[i]))

    def __iter__(self) -> Iterator[LaggedSample]:
        return (self[i] for i in range(len(self)))

    def take(self, rows) -> "LaggedSamples":
        rows = np.asarray(rows, dtype=np.int64)
        return LaggedSamples(
            np.ascontiguousarray(self.inputs[rows]),
            self.targets[rows].copy(),
            self.origins[rows].copy(),
            self.d_u,
            self.d_y,
        )

    def select_origins(self, ordinals) -> "LaggedSamples":
        """Samples whose target record is among ``ordinals``, in original order."""
        mask = np.isin(self.origins, np.asarray(list(ordinals), dtype=np.int64))
        return self.take(np.flatnonzero(mask))


def lag_arrays(u: np.ndarray, y: np.ndarray, d_u: int, d_y: int) -> LaggedSamples:
    """Assemble lagged rows from a feature matrix ``u`` (n, p) and target ``y`` (n,)."""
    if d_u < 0 or d_y < 0:
        raise ValueError("lags must be non-negative")
    u = np.asarray(u, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = u.shape
    start = max(d_u, d_y)
    if n <= start:
        raise DataError(f"need at least {start + 1} records for d_u={d_u}, d_y={d_y}; got {n}")
    m = n - start
    width = p * (d_u + 1) + d_y
    x = np.empty((m, width))
    for lag in range(d_u + 1):
        x[:, lag * p:(lag + 1) * p] = u[start - lag:n - lag]
    base = p * (d_u + 1)
    for lag in range(1, d_y + 1):
        x[:, base + lag - 1] = y[start - lag:n - lag]
    return LaggedSamples(x, y[start:].copy(), np.arange(start, n, dtype=np.int64), d_u, d_y)


def make_lagged(
    records: Sequence[QosRecord], d_u: int, d_y: int, loop_mode: str = "open"
) -> LaggedSamples:
    """Lagged samples in raw units.

    In ``"open"`` mode the feedback slots hold the true MOS of earlier records
    (teacher forcing). In ``"closed"`` mode they are NaN placeholders for the
    caller to fill with model output at run time.
    """
    if loop_mode not in ("open", "closed"):
        raise ValueError(f"unknown loop mode {loop_mode!r}")
    start = max(d_u, d_y)
    if len(records) <= start:
        raise DataError(
            f"need at least {start + 1} records for d_u={d_u}, d_y={d_y}; got {len(records)}"
        )
    y = mos_vector(records)
    if loop_mode == "open" and d_y > 0 and np.isnan(y).any():
        missing = int(np.flatnonzero(np.isnan(y))[0])
        raise DataError(f"record {missing} has no MOS, required for open-loop feedback")
    out = lag_arrays(feature_matrix(records), y, d_u, d_y)
    if loop_mode == "closed" and d_y > 0:
        out.inputs[:, out.inputs.shape[1] - d_y:] = np.nan
    return out


def normalized_lagged(records, normalizer: Normalizer, d_u: int, d_y: int) -> LaggedSamples:
    return lag_arrays(
        normalizer.transform(feature_matrix(records)),
        normalizer.transform_target(mos_vector(records)),
        d_u,
        d_y,
    )


# --------------------------------------------------------------------------- folds


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray = field(repr=False)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def sizes(self) -> list[int]:
        return [int(np.sum(self.assignments == f)) for f in range(self.k)]

    @property
    def digest(self) -> str:
        h = hashlib.sha256(f"k={self.k};".encode())
        h.update(np.asarray(self.assignments, dtype="<i8").tobytes())
        return h.hexdigest()[:16]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("ordinal,fold\n")
            for i, f in enumerate(self.assignments):
                fh.write(f"{i},{int(f)}\n")


def make_folds(n: int, k: int, seed: int, shuffle: bool = True) -> FoldPlan:
    """Round-robin fold assignment over (optionally) shuffled ordinals."""
    if not 2 <= k <= n:
        raise DataError(f"fold count k={k} must satisfy 2 <= k <= n={n}")
    order = make_rng(seed).permutation(n) if shuffle else np.arange(n)
    assign = np.empty(n, dtype=np.int64)
    assign[order] = np.arange(n) % k
    assign.setflags(write=False)
    return FoldPlan(k, assign)


def train_validation_split(count: int, seed: int, train_fraction: float = 0.7):
    """Shuffled positions split into training / validation parts (70/30 by default)."""
    if count < 2:
        raise DataError(f"need at least 2 samples for a train/validation split, got {count}")
    perm = make_rng(seed).permutation(count)
    n_train = min(max(int(round(train_fraction * count)), 1), count - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


# --------------------------------------------------------------------------- synthetic fixture

SYNTH_OFFSET = 2.5


def fixture_recursion(u: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """MOS-like series driven by two inputs.

    ``s(n) = tanh(0.6 s(n-1) - 0.3 s(n-2) + 0.8 u1(n) + 0.4 u2(n-1)) + e(n)``
    with ``y = clip(s + 2.5, 1, 5)``; the recursion runs on the centred
    output ``s`` and pre-sample history is zero.
    """
    n = u.shape[0]
    s = np.zeros(n + 2)
    u2_prev = 0.0
    for t in range(n):
        s[t + 2] = (
            math.tanh(0.6 * s[t + 1] - 0.3 * s[t] + 0.8 * u[t, 0] + 0.4 * u2_prev) + noise[t]
        )
        u2_prev = u[t, 1]
    return np.clip(s[2:] + SYNTH_OFFSET, MOS_MIN, MOS_MAX)


def synth_narx_series(n: int, seed: int, noise_sd: float = 0.05) -> list[QosRecord]:
    if n < 10:
        raise DataError(f"synthetic series needs n >= 10, got {n}")
    if noise_sd < 0:
        raise DataError("noise_sd must be non-negative")
    rng = make_rng(seed)
    u = rng.uniform(-1.0, 1.0, size=(n, 2))
    noise = rng.normal(0.0, 1.0, size=n) * noise_sd
    y = fixture_recursion(u, noise)
    return [QosRecord(i, u[i], float(y[i])) for i in range(n)]
