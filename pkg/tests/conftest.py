"""Shared fixtures: the acceptance-criteria recorder and its summary block."""

import pytest

_CRITERIA: dict[int, tuple[str, bool, float]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome and assert it."""

    def record(number: int, name: str, ok: bool, elapsed: float, budget: float):
        in_time = elapsed <= budget
        _CRITERIA[number] = (name, ok and in_time, elapsed)
        assert ok, f"criterion {number} ({name}) failed"
        assert in_time, (f"criterion {number} ({name}) exceeded its "
                         f"{budget:.0f}s budget: {elapsed:.1f}s")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        name, ok, elapsed = _CRITERIA[number]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"[{status}] criterion {number:2d}: {name} ({elapsed:.1f}s)")
