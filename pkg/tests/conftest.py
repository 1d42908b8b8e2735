import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session")
def oracle():
    return json.loads((FIXTURES / "oracle_values.json").read_text())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
