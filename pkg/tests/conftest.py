import time
from contextlib import contextmanager

import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Context manager timing one acceptance criterion and logging a PASS/FAIL line.

    The body may put a short measurement string under ``info["detail"]``.
    """
    log = request.config.stash[_LINES]

    @contextmanager
    def run(num: int, limit_s: float, title: str):
        info = {"detail": ""}
        t0 = time.perf_counter()
        try:
            yield info
        except BaseException as exc:
            el = time.perf_counter() - t0
            msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            log.append((num, f"FAIL criterion {num}: {title} [{el:.1f}s] {msg}"))
            raise
        el = time.perf_counter() - t0
        ok = el < limit_s
        status = "PASS" if ok else "FAIL"
        log.append((num, f"{status} criterion {num}: {title} [{el:.1f}s < {limit_s:g}s] {info['detail']}".rstrip()))
        assert ok, f"criterion {num} took {el:.1f}s, limit {limit_s:g}s"

    return run
