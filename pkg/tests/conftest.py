import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line acceptance verdict; printed again in the session summary."""

    def _report(tag: str, ok: bool, detail: str) -> bool:
        line = f"[{tag}] {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _LINES.append(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance summary")
        for line in sorted(_LINES):
            terminalreporter.write_line(line)
