import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict: ``criterion(n, ok, detail)``."""
    def record(number, ok, detail=""):
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE, key=lambda n: (int(str(n).rstrip('ab')), str(n))):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {str(number):>3}: {'PASS' if ok else 'FAIL'}  {detail}")
