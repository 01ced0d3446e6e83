import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "lvgm", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("lvgm")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pd(rng, d, low=0.5):
    A = rng.normal(size=(d, d))
    return A @ A.T / d + low * np.eye(d)


def random_orthonormal(rng, p, q):
    Q, R = np.linalg.qr(rng.normal(size=(p, q)))
    return Q * np.sign(np.diag(R))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
