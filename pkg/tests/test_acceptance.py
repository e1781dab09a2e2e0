"""Acceptance suite: one test per criterion at its stated tolerance.

The criteria share one evaluation (runs are cached between them); the
pass/fail table is printed to the terminal even under output capture.
"""

import pytest

from sidebalance import acceptance


@pytest.fixture(scope="module")
def results(pytestconfig):
    out = {r.number: r for r in acceptance.run_all(acceptance.Options())}
    capture = pytestconfig.pluginmanager.getplugin("capturemanager")
    with capture.global_and_fixture_disabled():
        print("\nacceptance criteria")
        for r in out.values():
            print("  " + r.line())
    return out


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(results, number):
    r = results[number]
    print(r.line())
    assert r.passed, r.line()


def test_reduced_horizon_reports_not_settled():
    r = acceptance.criterion_3(acceptance.Options(duration=0.1))
    assert not r.passed
    assert "not settled" in r.detail
