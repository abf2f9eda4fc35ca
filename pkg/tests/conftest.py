"""Shared fixtures: the acceptance-criterion recorder and summary printer."""

from contextlib import contextmanager

import pytest

_RESULTS = {}


class CriterionOutcome:
    def __init__(self, cid):
        self.cid = cid
        self.passed = False
        self.detail = ""


@pytest.fixture
def criterion():
    """Context manager recording one acceptance criterion's verdict.

    The body sets .passed and .detail; the exit records the result for
    the terminal summary and asserts the verdict.
    """

    @contextmanager
    def run(cid):
        out = CriterionOutcome(cid)
        try:
            yield out
        except BaseException as exc:
            _RESULTS[cid] = (False, f"error: {exc!r}"[:160])
            raise
        _RESULTS[cid] = (bool(out.passed), out.detail)
        assert out.passed, f"{cid}: {out.detail}"

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_RESULTS, key=lambda c: int(c[1:])):
        passed, detail = _RESULTS[cid]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{cid}: {status}  {detail}")
