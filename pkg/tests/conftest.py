import os

import numpy as np
import pytest

from budgetsvm import load_svmlight

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")
ADULT_TRAIN = os.path.join(DATA_DIR, "adult.train.gz")
ADULT_TEST = os.path.join(DATA_DIR, "adult.test.gz")
ADULT_FEATURES = 123


def separable_2d(n, seed, gap=0.2):
    """Points in [-1, 1]^2 labeled by a line, with a margin strip removed."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(4 * n, 2))
    s = X[:, 0] + 0.5 * X[:, 1]
    keep = np.abs(s) > gap
    X, s = X[keep][:n], s[keep][:n]
    return X, np.where(s > 0, 1.0, -1.0)


def blobs(n, seed, d=3, shift=1.0):
    """Two overlapping Gaussian blobs; labels +-1."""
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    X = rng.normal(size=(n, d)) + shift * y[:, None]
    return X, y


@pytest.fixture(scope="session")
def adult():
    """Dense ADULT train/test arrays, shared by the slow tests."""
    if not os.path.exists(ADULT_TRAIN):
        pytest.skip("ADULT data not available")
    X, y = load_svmlight(ADULT_TRAIN).to_arrays(ADULT_FEATURES)
    Xt, yt = load_svmlight(ADULT_TEST).to_arrays(ADULT_FEATURES)
    return X, y, Xt, yt


def assert_budget_trace(report, config):
    """Every maintenance event leaves B + 1 - (M - 1) SVs; never more than B + 1."""
    if config.strategy == "removal":
        expected = config.budget
    else:
        expected = config.budget + 1 - (config.mergees - 1)
    assert len(report.sv_count_trace) == report.maintenance_calls
    # a merge whose coefficient cancels to zero drops one more SV
    assert all(c in (expected, expected - 1) for c in report.sv_count_trace)
    assert report.max_sv_count <= config.budget + 1
    assert report.final_sv_count <= config.budget


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
