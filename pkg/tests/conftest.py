import time

import pytest

_LINES = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_LINES] = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion, printed at the end of the run."""
    lines = request.config.stash[_LINES]
    start = time.perf_counter()

    def report(n, title, ok, detail=""):
        secs = time.perf_counter() - start
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}] ({secs:.1f}s)"
        lines[n] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_LINES]
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
