import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for the acceptance summary, then assert."""

    def record(name: str, ok: bool, detail: str = ""):
        _LINES.append(f"{'PASS' if ok else 'FAIL'}  criterion {name}: {detail}")
        print(_LINES[-1])
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
