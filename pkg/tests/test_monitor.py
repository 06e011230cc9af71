import io

import numpy as np
import pytest

from narxqoe.dataset import QosRecord, synth_narx_series
from narxqoe.errors import DataError
from narxqoe.monitor import MonitorSession, run_stream
from narxqoe.narx import forward_closed_loop, forward_open_loop, save_model

from conftest import random_model, random_records


def stream(session, records):
    out = []
    for r in records:
        est = session.ingest(r)
        if est is not None:
            out.append((r.ordinal, est))
    return out


def test_warmup():
    m = random_model(3, 3, 1)
    s = MonitorSession(m)
    recs = random_records(6, 3)
    assert s.ingest(recs[0]) is None
    assert [o for o, _ in stream(s, recs[1:])] == [3, 4, 5]


@pytest.mark.parametrize("d_u,d_y", [(0, 0), (2, 0), (1, 3), (3, 3), (4, 4)])
def test_stream_batch_closed_loop_equivalence(d_u, d_y):
    m = random_model(3, d_u, d_y, 4, seed=d_u + d_y)
    recs = random_records(200, 3, seed=1, with_mos=False)
    got = stream(MonitorSession(m, "closed"), recs)
    origins, est = forward_closed_loop(m, recs)
    assert [o for o, _ in got] == origins.tolist()
    assert [e for _, e in got] == est.tolist()  # exact, 0 ulp
    assert len(got) == max(0, 200 - max(d_u, d_y))


def test_stream_batch_open_loop_equivalence():
    m = random_model(3, 2, 3, 4, seed=5)
    recs = random_records(60, 3, seed=2)
    got = stream(MonitorSession(m, "open"), recs)
    origins, est = forward_open_loop(m, recs)
    assert [o for o, _ in got] == origins.tolist()
    assert [e for _, e in got] == est.tolist()


def test_midpoint_seeding_starts_at_du():
    m = random_model(2, 1, 3, 3)
    recs = random_records(10, 2, with_mos=False)
    got = stream(MonitorSession(m, "closed", seed_midpoint=True), recs)
    origins, est = forward_closed_loop(m, recs, emit_from=1)
    assert [o for o, _ in got] == origins.tolist() == list(range(1, 10))
    assert [e for _, e in got] == est.tolist()


def test_zero_model_emits_denormalized_bias():
    m = random_model(2, 2, 2)
    m = m.with_params(np.zeros(m.topology.n_weights))
    m.output_bias = 0.25
    got = stream(MonitorSession(m), random_records(8, 2, with_mos=False))
    assert len(got) == 6
    assert all(e == pytest.approx(float(m.normalizer.inverse_target(0.25)), abs=1e-15) for _, e in got)


def test_ingest_errors():
    m = random_model(3, 1, 1)
    with pytest.raises(DataError):
        MonitorSession(m).ingest(QosRecord(0, [1.0, 2.0]))
    with pytest.raises(DataError):
        MonitorSession(m, "open").ingest(QosRecord(0, [0.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        MonitorSession(m, "sideways")


def test_bounded_memory():
    m = random_model(2, 3, 2)
    s = MonitorSession(m)
    for r in random_records(500, 2, with_mos=False):
        s.ingest(r)
    assert len(s.buffer.inputs) == 3 and len(s.buffer.outputs) == 2


@pytest.fixture
def model_file(tmp_path):
    m = random_model(2, 1, 2, 3, seed=1)
    path = tmp_path / "model.json"
    save_model(m, path)
    return m, path


def test_run_stream_empty(model_file):
    _, path = model_file
    out, err = io.StringIO(), io.StringIO()
    assert run_stream(path, [], out, err=err) == 0
    assert out.getvalue() == ""


def test_run_stream_matches_batch_and_format(model_file):
    m, path = model_file
    recs = synth_narx_series(30, 3)
    lines = ["f0,f1,mos"] + [f"{float(r.features[0])!r},{float(r.features[1])!r},{r.mos!r}" for r in recs]
    out = io.StringIO()
    assert run_stream(path, lines, out) == 0
    origins, est = forward_closed_loop(m, recs)
    expected = "".join(f"{o},{e:.4f}\n" for o, e in zip(origins, est))
    assert out.getvalue() == expected


def test_run_stream_headerless_and_corrupt_line(model_file):
    m, path = model_file
    recs = random_records(10, 2, seed=3, with_mos=False)
    lines = [f"{float(r.features[0])!r},{float(r.features[1])!r}" for r in recs]
    lines.insert(4, "1.0,banana")
    out, err = io.StringIO(), io.StringIO()
    assert run_stream(path, lines, out, err=err) == 0
    assert len(out.getvalue().splitlines()) == 10 - 2
    assert len(err.getvalue().splitlines()) == 1 and "line 5" in err.getvalue()
    origins, est = forward_closed_loop(m, recs)
    assert out.getvalue() == "".join(f"{o},{e:.4f}\n" for o, e in zip(origins, est))


def test_run_stream_schema_mismatch(model_file, tmp_path):
    _, path = model_file
    err = io.StringIO()
    assert run_stream(path, ["a,b,c", "1,2,3"], io.StringIO(), err=err) == 2
    assert "f0" in err.getvalue()
    (tmp_path / "bad.json").write_text("{")
    assert run_stream(tmp_path / "bad.json", [], io.StringIO(), err=err) == 2
