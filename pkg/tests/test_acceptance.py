"""The ten acceptance criteria, one test each.

Each test prints the criterion's pass/fail line; the lines are also
collected and repeated in the terminal summary.
"""
import pytest

from hsl.acceptance import CRITERIA

# wall-clock budgets in seconds
BUDGET = {1: 60, 2: 60, 3: 60, 4: 60, 5: 60, 6: 300, 7: 1800, 8: 7200, 9: 600, 10: 1800}
SLOW = {7, 8, 9, 10}


def _params():
    for k in sorted(CRITERIA):
        marks = [pytest.mark.slow] if k in SLOW else []
        yield pytest.param(k, marks=marks, id=f"criterion_{k}")


@pytest.mark.parametrize("number", _params())
def test_criterion(number, acceptance_lines):
    res = CRITERIA[number]()
    line = res.line()
    print(line)
    acceptance_lines.append(line)
    assert res.passed, line
    assert res.seconds < BUDGET[number], f"over the {BUDGET[number]} s budget: {line}"
