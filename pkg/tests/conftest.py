import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


# acceptance criteria append (label, status, detail) here; echoed after the run.
# status is True/False for gated criteria and a string for report-only lines.
ACCEPTANCE_LINES: list[tuple[str, object, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in ACCEPTANCE_LINES:
        tag = status if isinstance(status, str) else ("PASS" if status else "FAIL")
        terminalreporter.write_line(f"{tag}  {label}: {detail}")
