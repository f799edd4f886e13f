import pytest

from lambdacoal.measure import FiniteMeasure
from lambdacoal.ratetable import build_rate_table

_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion; returns the flag."""
    lines = request.config.stash[_VERDICTS]

    def record(criterion: int, ok: bool, detail: str) -> bool:
        line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((criterion, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def lebesgue_table_10k():
    """Shared Lebesgue table at ``n_max = 10**4``; smaller rows are exact sub-tables."""
    return build_rate_table(10_000, FiniteMeasure.lebesgue())
