import numpy as np
import pytest

from narxqoe.dataset import (
    SYNTH_SCHEMA,
    LaggedSamples,
    fit_normalizer,
    make_folds,
    mos_vector,
    normalized_lagged,
    synth_narx_series,
    train_validation_split,
)
from narxqoe.errors import DataError
from narxqoe.metrics import pearson
from narxqoe.narx import NarxTopology, forward_open_loop, init_model, jacobian, predict_batch
from narxqoe.training import (
    TrainConfig,
    effective_parameters,
    fit_on_records,
    sample_mse,
    train,
)

from conftest import random_model


def synth_split(n=400, d_u=1, d_y=2, hidden=4, seed=0, noise=0.05):
    recs = synth_narx_series(n, seed, noise)
    norm = fit_normalizer(recs, range(n))
    samples = normalized_lagged(recs, norm, d_u, d_y)
    tr, va = train_validation_split(len(samples), 1)
    model = init_model(NarxTopology(2, d_u, d_y, hidden), 3, norm, SYNTH_SCHEMA)
    return model, samples.take(tr), samples.take(va)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=10, patience=20)
    with pytest.raises(ValueError):
        TrainConfig(mu_dec=2.0)
    with pytest.raises(ValueError):
        TrainConfig(beta0=0.0)


def test_zero_residual_start_takes_no_step():
    model = random_model(2, 1, 1, 3, seed=4)
    x = np.random.default_rng(0).uniform(-1, 1, size=(40, model.topology.input_width))
    t = predict_batch(model, x)
    tr = LaggedSamples(x[:30], t[:30], np.arange(30), 1, 1)
    va = LaggedSamples(x[30:], t[30:], np.arange(30, 40), 1, 1)
    out, rep = train(model, tr, va, TrainConfig(alpha0=0.0, max_epochs=20, patience=5))
    assert rep.accepted_steps == []
    assert rep.stop_reason == "mu_max"
    np.testing.assert_array_equal(out.params(), model.params())


def test_accepted_steps_strictly_decrease_objective():
    model, tr, va = synth_split()
    _, rep = train(model, tr, va, TrainConfig(max_epochs=60, patience=60))
    assert rep.accepted_steps
    assert all(after < before for before, after in rep.accepted_steps)


def test_training_error_non_increasing_without_regularization():
    model, tr, va = synth_split()
    cfg = TrainConfig(alpha0=0.0, evidence_updates=False, max_epochs=40, patience=40)
    _, rep = train(model, tr, va, cfg)
    errs = [e.train_mse for e in rep.epochs]
    assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))


def test_snapshot_and_report_consistency():
    model, tr, va = synth_split()
    out, rep = train(model, tr, va, TrainConfig(max_epochs=80, patience=10))
    assert rep.best_epoch <= rep.stop_epoch
    assert sample_mse(out, va) == rep.best.val_mse
    assert sample_mse(out, tr) == rep.best.train_mse
    assert rep.best.val_mse == min(e.val_mse for e in rep.epochs)
    n_w = model.topology.n_weights
    assert all(0.0 <= e.gamma <= n_w for e in rep.epochs)
    assert out.training["best_epoch"] == rep.best_epoch


def test_deterministic():
    a_model, tr, va = synth_split()
    a, ra = train(a_model, tr, va, TrainConfig(max_epochs=30))
    b_model, tr2, va2 = synth_split()
    b, rb = train(b_model, tr2, va2, TrainConfig(max_epochs=30))
    np.testing.assert_array_equal(a.params(), b.params())
    assert [repr(e) for e in ra.epochs] == [repr(e) for e in rb.epochs]


def test_regularization_shrinks_weights():
    model, tr, va = synth_split(n=200)
    cfg = dict(evidence_updates=False, max_epochs=100, patience=100)
    free, _ = train(model, tr, va, TrainConfig(alpha0=0.0, **cfg))
    shrunk, _ = train(model, tr, va, TrainConfig(alpha0=50.0, beta0=1.0, **cfg))
    assert np.linalg.norm(shrunk.params()) < np.linalg.norm(free.params())


def test_train_rejects_bad_sets():
    model, tr, va = synth_split(n=100)
    with pytest.raises(DataError):
        train(model, tr, tr.take([]))
    with pytest.raises(DataError):
        train(model, tr, tr.take([0, 1]))


def test_effective_parameters_limits():
    model, tr, _ = synth_split(n=100)
    n_w = model.topology.n_weights
    assert effective_parameters(model, 0.0, 1.0, tr) == n_w
    assert effective_parameters(model, 1e12, 1.0, tr) < 1e-6
    with pytest.raises(ValueError):
        effective_parameters(model, -1.0, 1.0, tr)


@pytest.mark.parametrize("alpha,beta", [(0.01, 1.0), (0.5, 3.0), (10.0, 0.2)])
def test_effective_parameters_eigen_oracle(alpha, beta):
    model, tr, _ = synth_split(n=120, seed=2)
    jac = jacobian(model, tr.inputs)
    lam = np.linalg.eigvalsh(jac.T @ jac)
    oracle = float(np.sum(lam / (lam + alpha / beta)))
    assert abs(effective_parameters(model, alpha, beta, tr) - oracle) <= 1e-8


def test_report_csv(tmp_path):
    model, tr, va = synth_split(n=100)
    _, rep = train(model, tr, va, TrainConfig(max_epochs=5, patience=5))
    rep.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "epoch,train_mse,val_mse,test_mse,alpha,beta,gamma,mu"
    assert len(lines) == len(rep.epochs) + 1


def test_fit_on_records_synthetic_recovery():
    recs = synth_narx_series(1000, 5, 0.05)
    plan = make_folds(len(recs), 5, 1)
    test = plan.test_indices(0)
    fit = fit_on_records(recs, plan.train_indices(0), SYNTH_SCHEMA, 1, 2, 4, TrainConfig(seed=2))
    assert np.intersect1d(fit.train_origins, test).size == 0
    assert np.intersect1d(fit.val_origins, test).size == 0
    origins, est = forward_open_loop(fit.model, recs)
    keep = np.isin(origins, test)
    y = mos_vector(recs)[origins[keep]]
    assert pearson(est[keep], y) >= 0.98
