import pytest

_VERDICTS = {}


@pytest.fixture
def verdict(request):
    """Record one pass/fail line for an acceptance criterion.

    Usage: ``verdict(number, ok, detail)``. The line is printed right away
    and again in the terminal summary, so it shows up even when output is
    captured.
    """
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.setdefault(number, []).append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        for line in _VERDICTS[number]:
            terminalreporter.write_line(line)
