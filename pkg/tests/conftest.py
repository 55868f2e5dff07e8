import pytest

ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def report():
    """Record one summary line per acceptance criterion."""

    def _report(key: int, ok: bool, detail: str) -> bool:
        line = f"CRITERION {key}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES[key] = line
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
