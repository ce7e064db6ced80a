import pytest

_VERDICTS: list[tuple[int, str, bool, str]] = []
_NOTES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str = ""):
        _VERDICTS.append((number, title, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {title} {detail}")
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return record


@pytest.fixture
def note():
    def record(text: str):
        _NOTES.append(text)
        print(f"INFO {text}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_VERDICTS):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {title}  {detail}")
    for text in _NOTES:
        terminalreporter.write_line(f"INFO {text}")
