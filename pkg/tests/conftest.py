import pytest

_RESULTS: dict[int, tuple[bool, str]] = {}


class _Recorder:
    def record(self, number: int, ok: bool, detail: str) -> bool:
        _RESULTS[number] = (bool(ok), detail)
        print(f"criterion {number} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok


@pytest.fixture(scope="session")
def acceptance():
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        ok, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {detail}")
