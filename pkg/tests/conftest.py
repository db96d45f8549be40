import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from drml_iv.data_model import IvDataset

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_iv_data(rng, n=400, p=2, binary_y=False):
    x = rng.normal(size=(n, p))
    z = (rng.random(n) < 1 / (1 + np.exp(-0.5 * x[:, 0]))).astype(int)
    a0 = (rng.random(n) < 0.2).astype(int)
    a1 = np.maximum(a0, (rng.random(n) < 0.6).astype(int))
    a = np.where(z == 1, a1, a0)
    if binary_y:
        y = (rng.random(n) < 0.3 + 0.2 * a).astype(float)
    else:
        y = 1.0 + 2.0 * a + x @ np.linspace(0.5, -0.5, p) + rng.normal(size=n)
    return IvDataset(y, a, z, x)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
