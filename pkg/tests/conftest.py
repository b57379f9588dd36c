import pytest

ACCEPTANCE_LINES = []


def record(number, name, ok, detail=""):
    """Store and print one acceptance line."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {name}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


@pytest.fixture
def recorder():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
