from pathlib import Path

import pytest

from mmlilp.logic import Bias, Task
from mmlilp.taskio import TaskFiles, parse_atom, parse_rule

FIXTURES = Path(__file__).parent / "fixtures"


def A(text):
    return parse_atom(text)


def R(text):
    return parse_rule(text)


def make_task(facts, pos, neg, body_predicates, target=("p", 1), rules=(), **bias_kw):
    bias = Bias(target, tuple(body_predicates), **bias_kw)
    return Task(frozenset(A(f) for f in facts), tuple(R(r) for r in rules),
                tuple(A(e) for e in pos), tuple(A(e) for e in neg), bias)


@pytest.fixture
def trains_files():
    return TaskFiles(FIXTURES / "trains_small_bk.pl", FIXTURES / "trains_small_exs.pl",
                     FIXTURES / "trains_small_bias.pl")


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
