import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from factor_relevance import parse_clustering, parse_rules  # noqa: E402

ORACLE_RULES = """\
# worked two-rule example
RULE r1 CLASS=high COVERAGE=3: A1 > 0 AND A2 > 0
RULE r2 CLASS=low COVERAGE=1: A1 > 0
"""

ORACLE_FACTORS = """\
[clustering clinical]
F1: A1
F2: A2
F3: A3
"""


@pytest.fixture
def oracle_rules():
    return parse_rules(ORACLE_RULES)


@pytest.fixture
def oracle_clustering():
    return parse_clustering(ORACLE_FACTORS)


@pytest.fixture
def oracle_files(tmp_path):
    rules = tmp_path / "m.rules"
    rules.write_text(ORACLE_RULES)
    factors = tmp_path / "clinical.factors"
    factors.write_text(ORACLE_FACTORS)
    return rules, factors


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
