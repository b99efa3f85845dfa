from fractions import Fraction

import pytest

from g2ambient.expr import Point5, parse_expr
from g2ambient.field import EXACT, float_field
from g2ambient.metric import Example2Params, direct_metric
from g2ambient.sampling import random_points

FLOAT = float_field(256)

GENERIC_EX2 = Example2Params.of(a0=1, a1=2, a2=-1, a3=Fraction(1, 2), a4=3, a5=-2, a6=1)

SPLIT_FLAT = [[0, 0, 0, 0, 1], [0, 0, 0, 1, 0], [0, 0, 1, 0, 0], [0, 1, 0, 0, 0], [1, 0, 0, 0, 0]]


@pytest.fixture
def pt():
    return Point5.of(Fraction(1, 3), 2, Fraction(-5, 7), Fraction(3, 2), 4)


@pytest.fixture
def fpt():
    return Point5.of(Fraction(1, 3), 2, Fraction(-5, 7), Fraction(3, 2), 4, field=FLOAT)


@pytest.fixture
def flat(pt):
    return direct_metric(SPLIT_FLAT, pt, 6)


def sample(n, seed=7, field=EXACT, positive_q=False):
    return random_points(n, seed, field, positive_q)


def F(text):
    return parse_expr(text)


# -- acceptance summary: one PASS/FAIL line per criterion --------------------------------------

_criteria = {}


def pytest_collection_modifyitems(items):
    for item in items:
        if item.name.startswith("test_criterion_"):
            doc = (item.function.__doc__ or "").strip().splitlines()
            item.user_properties.append(("title", doc[0] if doc else item.name))


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    num = int(name.split("_")[2])
    title = dict(report.user_properties).get("title", name)
    ok, secs = _criteria.get(num, (True, 0.0, title))[:2]
    _criteria[num] = (ok and not report.failed, secs + report.duration, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(_criteria):
        ok, secs, title = _criteria[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  ({secs:.1f} s)  {title}")
