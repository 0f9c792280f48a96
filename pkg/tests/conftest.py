import pytest

_RESULTS = {}


@pytest.fixture
def record():
    """Store ``(passed, detail)`` for an acceptance criterion."""
    def _record(n, passed, detail):
        _RESULTS[n] = (bool(passed), detail)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        ok, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
