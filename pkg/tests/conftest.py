import numpy as np
import pytest

from narxqoe.dataset import FeatureSchema, Normalizer, QosRecord
from narxqoe.narx import NarxTopology, init_model


def random_model(p=3, d_u=2, d_y=2, hidden=4, seed=0, bias_scale=0.3):
    """Small NARX with nonzero biases and an identity-ish normalizer."""
    rng = np.random.default_rng(seed + 1000)
    model = init_model(
        NarxTopology(p, d_u, d_y, hidden),
        seed,
        Normalizer(-np.ones(p), np.ones(p), 1.0, 5.0),
        FeatureSchema(tuple(f"f{i}" for i in range(p))),
    )
    model.hidden_bias = rng.normal(0, bias_scale, hidden)
    model.output_bias = float(rng.normal(0, bias_scale))
    return model


def random_records(n, p, seed=0, with_mos=True):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(n, p))
    mos = rng.uniform(1, 5, size=n)
    return [QosRecord(i, x[i], float(mos[i]) if with_mos else None) for i in range(n)]


@pytest.fixture
def small_records():
    return random_records(40, 3, seed=5)


#: (criterion, status, detail) lines recorded by test_acceptance.py
ACCEPTANCE_LINES: list[tuple[str, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for cid, status, detail in sorted(ACCEPTANCE_LINES, key=lambda t: int(t[0][1:])):
        terminalreporter.write_line(f"{cid:<4} {status:<5} {detail}")
