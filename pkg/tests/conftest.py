import pytest

import reference

ACCEPTANCE_RESULTS: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (bool(passed), detail)


@pytest.fixture(scope="session")
def ref():
    return reference


@pytest.fixture(scope="session")
def modes():
    return reference.modes()


@pytest.fixture(scope="session")
def pair800():
    return reference.pair(800)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
