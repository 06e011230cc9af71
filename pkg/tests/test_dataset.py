import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from narxqoe.dataset import (
    CANONICAL_FEATURES,
    FeatureSchema,
    QosRecord,
    fit_normalizer,
    fixture_recursion,
    lag_arrays,
    load_csv,
    load_table,
    make_folds,
    make_lagged,
    mos_vector,
    synth_narx_series,
    train_validation_split,
)
from narxqoe.errors import DataError

from conftest import random_records


def write_csv(path, header, rows):
    path.write_text("\n".join([",".join(header)] + [",".join(map(str, r)) for r in rows]) + "\n")
    return path


def test_schema_validation():
    assert len(FeatureSchema(CANONICAL_FEATURES)) == 9
    with pytest.raises(DataError):
        FeatureSchema(())
    with pytest.raises(DataError):
        FeatureSchema(("a", "A"))
    with pytest.raises(DataError):
        FeatureSchema(("a", "mos"), "MOS")


def test_record_validation():
    with pytest.raises(DataError):
        QosRecord(0, [1.0, float("nan")])
    with pytest.raises(DataError):
        QosRecord(0, [1.0], 5.5)
    assert QosRecord(0, [1.0], 1.0).mos == 1.0


def test_load_csv_basic(tmp_path):
    header = list(CANONICAL_FEATURES) + ["MOS"]
    rows = [[i + j for j in range(9)] + [1 + i] for i in range(3)]
    path = write_csv(tmp_path / "d.csv", header, rows)
    recs = load_csv(path, FeatureSchema(CANONICAL_FEATURES))
    assert [r.ordinal for r in recs] == [0, 1, 2]
    assert recs[2].features.tolist() == [2.0 + j for j in range(9)]
    assert [r.mos for r in recs] == [1.0, 2.0, 3.0]


def test_load_csv_header_matching_ignores_case_and_spaces(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["a Frame Count", " Video Bit Rate ", "Mos"], [[1, 2, 3]])
    recs = load_csv(path, FeatureSchema(("aFrameCount", "videoBitRate")))
    assert recs[0].features.tolist() == [1.0, 2.0] and recs[0].mos == 3.0


def test_load_csv_order_by_is_stable(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["t", "x", "mos"], [[2, 10, 1], [1, 20, 2], [2, 30, 3], [0, 40, 4]])
    recs = load_csv(path, FeatureSchema(("x",)), order_by="t")
    assert [r.features[0] for r in recs] == [40.0, 20.0, 10.0, 30.0]
    assert [r.ordinal for r in recs] == [0, 1, 2, 3]


def test_load_csv_errors(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["x", "mos"], [[1, 2]])
    with pytest.raises(DataError, match="'y'"):
        load_csv(path, FeatureSchema(("x", "y")))
    bad = write_csv(tmp_path / "b.csv", ["x", "mos"], [[1, 2], [1, 2], [1, 2], [1, 2], [1, 7]])
    with pytest.raises(DataError, match="row 5"):
        load_csv(bad, FeatureSchema(("x",)))
    junk = write_csv(tmp_path / "j.csv", ["x", "mos"], [[1, 2], ["abc", 2]])
    with pytest.raises(DataError, match="row 2"):
        load_csv(junk, FeatureSchema(("x",)))
    inf = write_csv(tmp_path / "i.csv", ["x", "mos"], [["inf", 2]])
    with pytest.raises(DataError, match="non-finite"):
        load_csv(inf, FeatureSchema(("x",)))


def test_load_csv_without_target_column(tmp_path):
    path = write_csv(tmp_path / "d.csv", ["x"], [[1], [2]])
    recs = load_csv(path, FeatureSchema(("x",)))
    assert all(r.mos is None for r in recs)


def test_load_table(tmp_path):
    path = write_csv(tmp_path / "w.csv", ["a", "b", "id", "mos"], [[1, 2, 9, 3], [4, 5, 9, 4]])
    t = load_table(path, "mos", exclude=["id"])
    assert t.columns == ["a", "b"]
    assert t.values.tolist() == [[1.0, 2.0], [4.0, 5.0]]
    bad = write_csv(tmp_path / "n.csv", ["a", "name", "mos"], [[1, "x", 3]])
    with pytest.raises(DataError, match="non-numeric column 'name'"):
        load_table(bad)


# ----------------------------------------------------------------- normalizer


def test_normalizer_single_row_is_constant():
    recs = random_records(5, 3)
    norm = fit_normalizer(recs, [2])
    np.testing.assert_array_equal(norm.transform(recs[2].features), np.zeros(3))


def test_normalizer_endpoints():
    recs = [QosRecord(i, [v], 3.0) for i, v in enumerate([10.0, 20.0, 30.0])]
    norm = fit_normalizer(recs, [0, 1, 2])
    assert norm.transform(np.array([[10.0], [20.0], [30.0]])).ravel().tolist() == [-1.0, 0.0, 1.0]


def test_normalizer_round_trip():
    recs = random_records(100, 4, seed=9)
    norm = fit_normalizer(recs, range(100))
    x = np.vstack([r.features for r in recs])
    np.testing.assert_allclose(norm.inverse(norm.transform(x)), x, rtol=0, atol=1e-12)
    y = mos_vector(recs)
    np.testing.assert_allclose(norm.inverse_target(norm.transform_target(y)), y, rtol=0, atol=1e-12)


def test_normalizer_uses_only_given_rows():
    recs = random_records(20, 2, seed=1)
    spiked = list(recs)
    spiked[19] = QosRecord(19, [1e6, -1e6], 5.0)
    a = fit_normalizer(recs, range(10))
    b = fit_normalizer(spiked, range(10))
    assert a.to_dict() == b.to_dict()
    with pytest.raises(DataError):
        fit_normalizer(recs, [])


# ----------------------------------------------------------------- lagging


def enumerate_lagged(records, d_u, d_y):
    """Independent enumeration of the lagged argument list."""
    out = []
    for n in range(len(records)):
        if n < max(d_u, d_y):
            continue
        row = []
        for k in range(d_u + 1):
            row.extend(records[n - k].features.tolist())
        for k in range(1, d_y + 1):
            row.append(records[n - k].mos)
        out.append((row, records[n].mos, n))
    return out


def test_make_lagged_counts():
    recs = random_records(5, 2)
    s = make_lagged(recs, 3, 3)
    assert len(s) == 2 and s.origins.tolist() == [3, 4]
    assert len(make_lagged(random_records(160, 9), 3, 3)) == len(enumerate_lagged(random_records(160, 9), 3, 3)) == 157


def test_make_lagged_mlp_case():
    recs = random_records(7, 3)
    s = make_lagged(recs, 0, 0)
    assert len(s) == 7
    np.testing.assert_array_equal(s.inputs, np.vstack([r.features for r in recs]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4), st.integers(1, 4), st.integers(0, 10_000))
def test_make_lagged_layout_matches_enumeration(d_u, d_y, p, seed):
    recs = random_records(12, p, seed=seed)
    s = make_lagged(recs, d_u, d_y)
    ref = enumerate_lagged(recs, d_u, d_y)
    assert len(s) == len(ref)
    for sample, (row, target, origin) in zip(s, ref):
        assert sample.input.tolist() == row
        assert sample.target == target and sample.origin == origin
        assert sample.input.size == p * (d_u + 1) + d_y


def test_make_lagged_errors():
    with pytest.raises(DataError, match="at least 4"):
        make_lagged(random_records(3, 2), 3, 1)
    recs = random_records(6, 2, with_mos=False)
    with pytest.raises(DataError, match="MOS"):
        make_lagged(recs, 1, 1)
    closed = make_lagged(recs, 1, 2, loop_mode="closed")
    assert np.isnan(closed.inputs[:, -2:]).all()
    assert len(make_lagged(recs, 2, 0)) == 4


# ----------------------------------------------------------------- folds


def test_make_folds_sizes():
    assert make_folds(160, 5, 0).sizes() == [32] * 5
    assert sorted(make_folds(10, 3, 0).sizes(), reverse=True) == [4, 3, 3]
    a, b = make_folds(50, 5, 7), make_folds(50, 5, 7)
    np.testing.assert_array_equal(a.assignments, b.assignments)
    assert a.digest == b.digest
    with pytest.raises(DataError):
        make_folds(10, 1, 0)
    with pytest.raises(DataError):
        make_folds(3, 4, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 300), st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_fold_plan_disjoint_cover(n, k, seed):
    k = min(k, n)
    plan = make_folds(n, k, seed)
    tests = [plan.test_indices(f) for f in range(k)]
    assert np.array_equal(np.sort(np.concatenate(tests)), np.arange(n))
    sizes = plan.sizes()
    assert max(sizes) - min(sizes) <= 1
    for f in range(k):
        assert np.intersect1d(plan.train_indices(f), plan.test_indices(f)).size == 0


def test_fold_plan_csv(tmp_path):
    plan = make_folds(6, 2, 1)
    plan.write_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "ordinal,fold" and len(lines) == 7


def test_train_validation_split():
    tr, va = train_validation_split(100, 3)
    assert len(tr) == 70 and len(va) == 30
    assert np.intersect1d(tr, va).size == 0
    tr2, _ = train_validation_split(100, 3)
    np.testing.assert_array_equal(tr, tr2)


# ----------------------------------------------------------------- synthetic fixture


def test_fixture_fixed_point():
    y = fixture_recursion(np.zeros((50, 2)), np.zeros(50))
    np.testing.assert_array_equal(y, np.full(50, 2.5))


def test_fixture_recursion_by_hand():
    u = np.array([[0.5, -0.2], [0.1, 0.4], [-0.3, 0.9]])
    y = fixture_recursion(u, np.zeros(3))
    s0 = np.tanh(0.8 * 0.5)
    s1 = np.tanh(0.6 * s0 + 0.8 * 0.1 + 0.4 * -0.2)
    s2 = np.tanh(0.6 * s1 - 0.3 * s0 + 0.8 * -0.3 + 0.4 * 0.4)
    np.testing.assert_allclose(y, np.array([s0, s1, s2]) + 2.5, atol=1e-15)


def test_synth_deterministic_and_bounded():
    a = synth_narx_series(200, 4, 0.05)
    b = synth_narx_series(200, 4, 0.05)
    assert [r.mos for r in a] == [r.mos for r in b]
    assert all(1.0 <= r.mos <= 5.0 for r in a)
    assert all(np.all(np.abs(r.features) <= 1) for r in a)
    with pytest.raises(DataError):
        synth_narx_series(5, 0)
