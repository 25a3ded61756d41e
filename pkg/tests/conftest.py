from fractions import Fraction

import pytest

from pareto_contracts.lq_model import LqParams

FIG1_K = [[2, 1], [10, 5]]

_ACCEPTANCE_LINES = []


@pytest.fixture
def fig1():
    return LqParams(k=FIG1_K, r_p=1.0)


@pytest.fixture
def fig1_exact():
    return LqParams(k=[[Fraction(v) for v in row] for row in FIG1_K], r_p=Fraction(1))


@pytest.fixture
def report_criterion():
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""

    def record(number, title, passed, detail=""):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {title}"
        if detail:
            line += f" ({detail})"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
