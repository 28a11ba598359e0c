from __future__ import annotations

import math
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
DEMO = ROOT / "demo"
GOLDEN = Path(__file__).resolve().parent / "golden"

# filled by tests/test_acceptance.py; printed once at the end of the run
ACCEPTANCE_LINES: list[str] = []


def brute_ranks(values):
    """O(n^2) average ranks: count strictly smaller values plus half the ties."""
    out = []
    for v in values:
        less = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        out.append(less + (equal + 1) / 2)
    return out


def brute_pearson(a, b):
    n = len(a)
    ma, mb = math.fsum(a) / n, math.fsum(b) / n
    cov = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = math.fsum((x - ma) ** 2 for x in a)
    vb = math.fsum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def brute_spearman(x, y):
    return brute_pearson(brute_ranks(x), brute_ranks(y))


@pytest.fixture
def demo_dir() -> Path:
    return DEMO


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# top ten journals by 2004 UIF as printed: (title, UIF, IF)
TOP_TEN_2004 = [
    ("TOP EARLY CHILD SPEC", 6.759, 0.862),
    ("HISPANIC J BEHAV SCI", 6.720, 0.500),
    ("INTERV SCH CLIN", 6.017, 0.172),
    ("MONOGR SOC RES CHILD", 5.571, 7.286),
    ("J SCHOOL PSYCHOL", 5.000, 1.750),
    ("J FAM VIOLENCE", 4.964, 0.491),
    ("SEX ROLES", 4.804, 0.639),
    ("J YOUTH ADOLESCENCE", 4.723, 0.855),
    ("EDUC URBAN SOC", 4.653, 0.224),
    ("J AUTISM DEV DISORD", 4.513, 2.128),
]


def top_ten_records():
    """Downloads chosen so that downloads / 1000 reproduces each printed UIF."""
    from uif.model import JournalYearRecord

    return [JournalYearRecord(k, 2004, round(u * 1000), 1000, f, round(u * 1000) / 1000) for k, u, f in TOP_TEN_2004]
