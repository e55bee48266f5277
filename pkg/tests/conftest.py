import pytest

_criterion_lines = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict and enforce it."""
    def record(num: int, passed: bool, note: str):
        _criterion_lines.append(
            f"[criterion {num:2d}] {'PASS' if passed else 'FAIL'} - {note}")
        assert passed, f"criterion {num}: {note}"
    return record


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(_criterion_lines):
            terminalreporter.write_line(line)
