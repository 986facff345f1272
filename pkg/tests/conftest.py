import contextlib
import time

import pytest

_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Context manager recording PASS/FAIL and wall time for an acceptance criterion."""
    @contextlib.contextmanager
    def record(number, title):
        t0 = time.perf_counter()
        try:
            yield
        except BaseException:
            _ACCEPTANCE[number] = ("FAIL", title, time.perf_counter() - t0)
            raise
        _ACCEPTANCE[number] = ("PASS", title, time.perf_counter() - t0)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, secs = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}  ({secs:.1f} s)")
