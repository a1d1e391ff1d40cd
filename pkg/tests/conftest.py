import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gaussdelay import DelayModel, HistoryPath, toggle_lna

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# (x low, y high) toggle state at beta=0.73, k=0.05, gamma=ln 2, from a
# 30-digit mpmath root solve
TOGGLE_V = 0.0498338787084921371685106043458
TOGGLE_W = 1.00333350114045115020423441279
TOGGLE_SYM = 0.330586747969200976036907048875


@pytest.fixture(scope="session")
def toggle():
    """Centered toggle LNA (epsilon = 1/sqrt(1000)) and its stationary state."""
    return toggle_lna()


@pytest.fixture(scope="session")
def toggle_history(toggle):
    _, state = toggle
    return HistoryPath.constant(np.array([0.0453, 1.1323]) - state.z, 1.0)


def brownian(d=2, tau=1.0):
    return DelayModel.centered(np.zeros((d, d)), np.zeros((d, d)), np.eye(d), tau)


def scalar_ou(b=-1.0, sigma=0.7, tau=1.0):
    return DelayModel.centered([[b]], [[0.0]], [[sigma]], tau)


def ou_cov(s, t, b, sigma):
    """Closed-form covariance of dX = bX dt + sigma dW, X_0 = 0, for s <= t."""
    return sigma ** 2 * math.exp(b * (t - s)) * (math.exp(2 * b * s) - 1) / (2 * b)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion and return the verdict."""

    def report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
