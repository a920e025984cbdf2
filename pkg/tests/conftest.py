import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def verdict():
    """record(n, ok, detail) stores the one-line outcome of acceptance criterion n."""
    def record(n: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[n] = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
        print(_ACCEPTANCE[n])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
