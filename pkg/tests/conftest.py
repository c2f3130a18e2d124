import contextlib

import pytest


def pytest_configure(config):
    config._acceptance = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = getattr(config, "_acceptance", {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(log):
        verdict, title, detail = log[num]
        line = f"criterion {num:2d} {verdict}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Context manager recording a PASS/FAIL line for an acceptance criterion.

    The body may put a short result string under ``info["detail"]``.
    """
    log = request.config._acceptance

    @contextlib.contextmanager
    def record(num, title):
        info = {"detail": ""}
        try:
            yield info
        except BaseException:
            log[num] = ("FAIL", title, info["detail"])
            raise
        log[num] = ("PASS", title, info["detail"])

    return record
