import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from triple_scatter.weyl import ExtensionParams, Interval, LeadRational, StarGraph

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def lead_rational():
    """Two channels, one open lead, a constant part and two poles."""
    w = np.diag([1.0, 0.0])
    v = np.array([[0.5, 0.2], [0.2, -0.3]])
    a1 = np.array([[1.0, 0.3], [0.3, 0.4]])
    a2 = np.array([[0.2, 0.0], [0.0, 0.7]])
    return LeadRational(w + 0.3 * np.eye(2), v, [(2.5, a1), (6.0, a2)])


def catalog():
    return {
        "star1": StarGraph(1),
        "star2": StarGraph(2),
        "star3": StarGraph(3),
        "lead": lead_rational(),
        "interval": Interval(3.0),
    }


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def star2_ext():
    return StarGraph(2), ExtensionParams.sqrt2(np.diag([1.0, -1.0]))
