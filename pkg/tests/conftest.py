import os
import sys

import pytest
from hypothesis import settings

from morims.calibration import builtin_paper_dataset, fit

settings.register_profile("default", deadline=None, derandomize=True)
settings.register_profile("thorough", deadline=None, max_examples=2000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def builtin_data():
    return builtin_paper_dataset()


@pytest.fixture(scope="session")
def summary_fit(builtin_data):
    """Fit to the four tapered summary extinction points only."""
    return fit(builtin_data.subset(lambda p: p.label == "summary"), budget=10_000, seed=1)


@pytest.fixture(scope="session")
def joint_fit(builtin_data):
    """Fit to all eleven built-in points, as the ``fit`` command does by default."""
    return fit(builtin_data, budget=10_000, seed=1)


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
