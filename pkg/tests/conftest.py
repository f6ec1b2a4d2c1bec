from fractions import Fraction

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

HALF = Fraction(1, 2)
THIRD = Fraction(1, 3)


@pytest.fixture
def params_third():
    from periodic_asep.scalars import ModelParams
    return ModelParams(Fraction(1, 3), Fraction(2, 3))


#: one "criterion N: PASS/FAIL ..." line per acceptance check, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
