"""Streaming MOS estimation from periodic QoS reports.

One input line is one reporting tick (RTCP reports typically arrive every
5 s); the session does no wall-clock scheduling of its own.
"""
from __future__ import annotations

import sys
from typing import IO, Iterable

import numpy as np

from .dataset import MOS_MAX, MOS_MIN, QosRecord, column_key
from .errors import DataError, ModelFileError
from .narx import DelayBuffer, NarxModel, forward_sample, load_model


class MonitorSession:
    """Delay-line state for one stream. Not thread-safe; use one per stream."""

    def __init__(
        self,
        model: NarxModel,
        mode: str = "closed",
        tick_seconds: float = 5.0,
        seed_midpoint: bool = False,
    ):
        if mode not in ("open", "closed"):
            raise ValueError(f"unknown loop mode {mode!r}")
        if model.normalizer is None:
            raise ValueError("model has no normalizer")
        self.model = model
        self.mode = mode
        self.tick_seconds = tick_seconds
        t = model.topology
        self.emit_from = t.d_u if (seed_midpoint and mode == "closed") else t.warmup
        self.buffer = DelayBuffer(t.d_u, t.d_y)
        self.records_seen = 0

    def ingest(self, record: QosRecord) -> float | None:
        """Push one record; return the clipped MOS estimate once warmed up."""
        model = self.model
        if record.features.shape != (model.topology.p,):
            raise DataError(
                f"record has {record.features.size} features, model expects {model.topology.p}"
            )
        if self.mode == "open" and record.mos is None:
            raise DataError("open-loop monitoring needs the true MOS on every record")
        n = self.records_seen
        u = model.normalizer.transform(record.features)
        estimate = None
        if self.buffer.inputs_ready:
            y_hat = forward_sample(model, self.buffer.compose(u))
            if n >= self.emit_from:
                raw = model.normalizer.inverse_target(y_hat)
                estimate = float(np.clip(raw, MOS_MIN, MOS_MAX))
        else:
            y_hat = 0.0
        if self.mode == "open":
            y_hat = float(model.normalizer.transform_target(record.mos))
        self.buffer.push(u, y_hat)
        self.records_seen += 1
        return estimate


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def run_stream(
    model_path,
    lines: Iterable[str],
    out: IO[str],
    mode: str = "closed",
    err: IO[str] | None = None,
) -> int:
    """Read CSV lines, write ``ordinal,estimate`` per emitted estimate.

    A header row is optional and detected by non-numeric cells. Rows without a
    header list the features in schema order, optionally followed by MOS.
    Returns 0 on clean end of stream, 2 when the model or header is unusable.
    """
    err = err if err is not None else sys.stderr
    try:
        model = load_model(model_path)
    except ModelFileError as exc:
        print(f"error: {exc}", file=err)
        return 2
    session = MonitorSession(model, mode)
    p = model.topology.p
    feat_idx: list[int] | None = None
    mos_idx: int | None = None
    first = True
    ordinal = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        cells = [c.strip() for c in line.split(",")]
        if first:
            first = False
            if not all(_is_number(c) for c in cells):
                if model.schema is None:
                    print("error: header given but model has no schema", file=err)
                    return 2
                keys = [column_key(c) for c in cells]
                try:
                    feat_idx = [keys.index(column_key(nm)) for nm in model.schema.names]
                except ValueError:
                    missing = [nm for nm in model.schema.names if column_key(nm) not in keys]
                    print(f"error: header lacks model features {missing}", file=err)
                    return 2
                tk = column_key(model.schema.target)
                mos_idx = keys.index(tk) if tk in keys else None
                continue
        try:
            if feat_idx is None:
                if len(cells) not in (p, p + 1):
                    raise DataError(f"expected {p} or {p + 1} fields, got {len(cells)}")
                feats = [float(c) for c in cells[:p]]
                mos = float(cells[p]) if len(cells) == p + 1 and cells[p] else None
            else:
                feats = [float(cells[i]) for i in feat_idx]
                mos = float(cells[mos_idx]) if mos_idx is not None and cells[mos_idx] else None
            record = QosRecord(ordinal, np.array(feats), mos)
            est = session.ingest(record)
        except (ValueError, IndexError) as exc:
            print(f"line {lineno}: {exc}", file=err)
            continue
        if est is not None:
            out.write(f"{ordinal},{est:.4f}\n")
            out.flush()
        ordinal += 1
    return 0
