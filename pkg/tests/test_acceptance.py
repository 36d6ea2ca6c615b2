"""Every acceptance criterion at its stated tolerance, one test each.

Each test records a one-line PASS/FAIL summary that is printed at the end of
the session (see ``conftest.py``) and also echoed to stdout.
"""

import pytest

from sfcdd.acceptance import run_criterion

from .conftest import ACCEPTANCE_LINES


def check(number):
    res = run_criterion(number)
    line = res.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.passed, line


@pytest.mark.slow
def test_criterion_1_faulty_pcg_iterations():
    check(1)


@pytest.mark.slow
def test_criterion_2_overlap_benefit():
    check(2)


@pytest.mark.slow
def test_criterion_3_weak_scaling_plateau():
    check(3)


@pytest.mark.slow
def test_criterion_4_six_dimensions():
    check(4)


def test_criterion_5_optimal_rate_bound():
    check(5)


def test_criterion_6_exact_coverage():
    check(6)


@pytest.mark.slow
def test_criterion_7_expected_error_bounds():
    check(7)


@pytest.mark.slow
def test_criterion_8_oracle_suites():
    check(8)


def test_criterion_9_fault_machinery():
    check(9)
