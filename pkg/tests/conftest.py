import pytest

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance(capsys):
    """``acceptance(number, passed, detail)`` prints one PASS/FAIL line for a
    criterion (also repeated in the terminal summary) and returns ``passed``."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {detail}"
        _ACCEPTANCE.append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
