import time
from contextlib import contextmanager

import pytest

_VERDICTS: list[tuple[int, str]] = []


class _Record:
    def __init__(self):
        self.detail = ""


@contextmanager
def _criterion(number, title):
    rec = _Record()
    start = time.perf_counter()
    try:
        yield rec
    except BaseException as exc:
        reason = rec.detail or f"{type(exc).__name__}: {str(exc).strip().splitlines()[0] if str(exc).strip() else ''}"
        _VERDICTS.append((number, f"criterion {number} FAIL  {title}: {reason} "
                                  f"({time.perf_counter() - start:.1f}s)"))
        raise
    _VERDICTS.append((number, f"criterion {number} PASS  {title}: {rec.detail} "
                              f"({time.perf_counter() - start:.1f}s)"))


@pytest.fixture
def criterion():
    """``with criterion(n, title) as rec:`` records one pass/fail line for the acceptance summary."""
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
