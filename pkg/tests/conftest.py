import numpy as np
import pytest

ACCEPTANCE_LINES = []


def record(number, name, ok, detail=""):
    line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {name}" + (f" -- {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
