import numpy as np
import pytest

from modeconn import nn
from modeconn.data import gen_synthetic
from modeconn.training import train_model

ACCEPTANCE_LINES = []


def central_differences(f, w, h=1e-5):
    w = np.array(w, dtype=np.float64)
    out = np.empty_like(w)
    for k in range(w.size):
        e = np.zeros_like(w)
        e[k] = h
        out[k] = (f(w + e) - f(w - e)) / (2 * h)
    return out


def max_relative_error(a, b, floor=1e-5):
    """Componentwise |a-b| / max(|a|, |b|, floor)."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def blobs():
    train = gen_synthetic("gaussian_blobs", 300, 0.8, seed=5, n_classes=3)
    test = gen_synthetic("gaussian_blobs", 150, 0.8, seed=6, n_classes=3, split="test")
    return train, test


@pytest.fixture(scope="session")
def spirals():
    train = gen_synthetic("two_spirals", 2000, 0.05, seed=1)
    test = gen_synthetic("two_spirals", 1000, 0.05, seed=2, split="test")
    return train, test


@pytest.fixture(scope="session")
def spiral_config():
    return nn.MLPConfig((2, 32, 32, 2), l2_coeff=1e-4)


@pytest.fixture(scope="session")
def spiral_pair(spirals, spiral_config):
    """Two networks trained on two-spirals from different seeds."""
    train, _ = spirals
    w_a, _ = train_model(spiral_config, train, 100, 0.05, 64, seed=11)
    w_b, _ = train_model(spiral_config, train, 100, 0.05, 64, seed=12)
    return w_a, w_b


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
