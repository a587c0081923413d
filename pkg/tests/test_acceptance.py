"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

The lines bypass output capture, so they show in any pytest run.
"""

import pytest

from hypoflow import checks as K


def _report(r, capsys):
    line = r.line()
    with capsys.disabled():
        print("\n" + line, flush=True)
    return line


@pytest.mark.parametrize("fn", K.ALL_CHECKS, ids=[f.__name__.removeprefix("check_") for f in K.ALL_CHECKS])
def test_acceptance(fn, capsys):
    r = fn()
    line = _report(r, capsys)
    assert r.passed, line
