"""Collects acceptance results and prints one PASS/FAIL line per criterion."""
import pytest

_RESULTS = {}


class AcceptanceLog:
    def record(self, number, title, ok, detail=""):
        _RESULTS[number] = (title, bool(ok), detail)
        return ok


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, detail = _RESULTS[number]
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}  {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
