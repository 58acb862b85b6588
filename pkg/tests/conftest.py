from collections import OrderedDict

import pytest

# criterion id -> list of (passed, text); filled by the acceptance tests
_RESULTS = OrderedDict()


@pytest.fixture
def criterion():
    """Record (and print) one PASS/FAIL line for a criterion part."""

    def record(cid, passed, text):
        _RESULTS.setdefault(cid, []).append((bool(passed), text))
        print(f"{'PASS' if passed else 'FAIL'} {cid}: {text}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_RESULTS, key=lambda c: int(c[1:])):
        parts = _RESULTS[cid]
        ok = all(p for p, _ in parts)
        tr.write_line(f"{'PASS' if ok else 'FAIL'} {cid}")
        for p, text in parts:
            tr.write_line(f"    {'pass' if p else 'FAIL'}  {text}")
