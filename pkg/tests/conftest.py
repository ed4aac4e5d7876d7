import numpy as np
import pytest

from deephazard.survival_data import SurvivalRecord, TimeGrid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_records(rng, n=12, grid=(0.0, 0.3, 0.6), p=2, tau=1.0, ties=False):
    x = rng.uniform(0.0, tau * 1.1, n)
    if ties:
        x = np.round(x, 1)
    delta = rng.integers(0, 2, n)
    Z = rng.normal(size=(n, len(grid), p))
    return [SurvivalRecord(i, float(x[i]), int(delta[i]), Z[i]) for i in range(n)], TimeGrid(grid, tau)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record one summary line per acceptance criterion; printed at the end of the run."""

    def record(criterion, ok, detail):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        line = f"criterion {criterion}: {status} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
