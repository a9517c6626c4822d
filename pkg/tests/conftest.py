import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=100,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

#: Acceptance-suite lines, keyed by criterion number, for the terminal summary.
CRITERIA_KEY = pytest.StashKey[dict]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(CRITERIA_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def iv_columns(rng, n=400, modifiers=True):
    """A well-conditioned dataset with a continuous instrument and binary modifiers."""
    z = rng.standard_normal(n)
    u = rng.integers(0, 2, n).astype(float)
    v = rng.integers(0, 2, n).astype(float)
    conf = rng.standard_normal(n)
    x = 0.8 * z + 0.3 * u * z + conf + rng.standard_normal(n)
    y = 0.5 * x + 0.4 * u + conf + rng.standard_normal(n)
    cols = {"Z": z, "X": x, "Y": y}
    if modifiers:
        cols.update(U6=u, V6=v)
    return cols
