import re
import sys

import pytest

from ctxtree import Context, CStree, Stage, Staging, StateSpace


def _staging(level, contexts):
    return Staging(level, [Stage(Context(c), level) for c in contexts])


@pytest.fixture
def four_var_tree_a() -> CStree:
    """Four binary variables, order 0123.  Level 1 is unsplit; level 2 has a
    one-variable stage {1=1} and two singletons; level 3 has stages {2=0},
    {1=0,2=1}, and two singletons."""
    space = StateSpace([2, 2, 2, 2])
    stagings = [
        _staging(1, [{}]),
        _staging(2, [{1: 1}, {0: 0, 1: 0}, {0: 1, 1: 0}]),
        _staging(3, [{2: 0}, {1: 0, 2: 1}, {0: 0, 1: 1, 2: 1}, {0: 1, 1: 1, 2: 1}]),
    ]
    return CStree((0, 1, 2, 3), space, stagings)


@pytest.fixture
def four_var_tree_b() -> CStree:
    """Four binary variables, order 0123.  Level 3 pairs variable 0 with
    variable 2 in three stages and leaves the (0, *, 0) outcomes as
    singletons."""
    space = StateSpace([2, 2, 2, 2])
    stagings = [
        _staging(1, [{}]),
        _staging(2, [{1: 1}, {0: 0, 1: 0}, {0: 1, 1: 0}]),
        _staging(
            3,
            [
                {0: 1, 2: 1},
                {0: 1, 2: 0},
                {0: 0, 2: 1},
                {0: 0, 1: 0, 2: 0},
                {0: 0, 1: 1, 2: 0},
            ],
        ),
    ]
    return CStree((0, 1, 2, 3), space, stagings)


def pytest_runtest_logreport(report):
    """Print one pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    status = "PASS" if report.passed else "FAIL"
    sys.stderr.write(f"\n[acceptance] criterion {int(m.group(1))}: {status}\n")
