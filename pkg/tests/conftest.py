import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line; it is echoed and repeated in the terminal summary."""

    def emit(tag: str, name: str, ok: bool, detail: str = "") -> None:
        line = f"{tag} {name}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
        print(line)
        _LINES.append(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance")
        for line in _LINES:
            terminalreporter.write_line(line)
