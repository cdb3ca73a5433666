import warnings

import numpy as np
import pytest

from diffeolab.chart import make_chart
from diffeolab.construction import build_kit

# acceptance lines collected by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def chart():
    return make_chart()


@pytest.fixture(scope="session")
def kit(chart):
    return build_kit(chart, i_max=6)


@pytest.fixture(autouse=True)
def _quiet_overflow():
    # endpoint evaluations overflow on purpose; the code maps them to 0 or inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with np.errstate(over="ignore", under="ignore"):
            yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
