import pytest

_LINES = []


@pytest.fixture
def verdict():
    """Record one 'ACCEPTANCE <id> PASS|FAIL <detail>' line and return the flag."""

    def record(ident: str, ok: bool, detail: str = "") -> bool:
        line = f"ACCEPTANCE {ident:>2} {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        _LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
