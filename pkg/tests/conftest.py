import contextlib

import pytest

_criteria: list[tuple[str, str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion; the outcome is listed in the terminal summary."""

    @contextlib.contextmanager
    def record(code, description):
        detail = {}
        try:
            yield detail
        except BaseException:
            _criteria.append((code, description, False, detail.get("note", "")))
            raise
        _criteria.append((code, description, True, detail.get("note", "")))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for code, description, ok, note in sorted(_criteria, key=lambda c: int(c[0][2:])):
        line = f"[{'PASS' if ok else 'FAIL'}] {code} {description}"
        terminalreporter.write_line(line + (f" -- {note}" if note else ""))
