import pytest

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; the test still asserts on its own."""

    def record(number: int, title: str, passed: bool, detail: str = ""):
        _CRITERIA[number] = (title, bool(passed), detail)
        print(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}  {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}  {detail}")
