import numpy as np
import pytest

from fedeve.model import Batch, ModelSpec


class QuadraticModel:
    """Scalar test model with per-example loss 0.5 * (w - a_i)^2, a_i = features[i, 0]."""

    dim = 1

    def loss_and_gradient(self, w, features, labels):
        a = features[:, 0]
        return float(np.mean(0.5 * (w[0] - a) ** 2)), np.array([np.mean(w[0] - a)])


class FlatModel:
    """Zero loss and zero gradient everywhere."""

    def __init__(self, dim):
        self.dim = dim

    def loss_and_gradient(self, w, features, labels):
        return 0.0, np.zeros(self.dim)


@pytest.fixture
def quadratic():
    return QuadraticModel()


def random_instance(rng, kind):
    d_in = int(rng.integers(1, 6))
    c = int(rng.integers(2, 5))
    h = int(rng.integers(1, 5)) if kind == "mlp" else 0
    spec = ModelSpec(kind, d_in, c, h, 0.5)
    n = int(rng.integers(1, 8))
    X = rng.standard_normal((n, d_in))
    y = rng.integers(0, c, n)
    w = rng.uniform(-1, 1, spec.dim)
    return spec, w, Batch(X, y)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.REPORT):
            terminalreporter.write_line(line)
