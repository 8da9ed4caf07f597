from __future__ import annotations

import numpy as np
import pytest

from afdlab.relation import ContingencyTable, Relation, contingency

R0_ROWS = [("a", "1"), ("a", "1"), ("a", "2"), ("b", "1")]

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def r0() -> Relation:
    return Relation.from_rows("R0", ["X", "Y"], R0_ROWS)


@pytest.fixture
def r0_table(r0) -> ContingencyTable:
    return contingency(r0, ["X"], ["Y"])


def random_table(
    rng: np.random.Generator, n_max: int, kx_max: int = 5, ky_max: int = 5, n_min: int = 1
) -> ContingencyTable:
    """A table of n uniform (x, y) draws over small random domains."""
    n = int(rng.integers(n_min, n_max, endpoint=True))
    kx = int(rng.integers(1, kx_max, endpoint=True))
    ky = int(rng.integers(1, ky_max, endpoint=True))
    xs = rng.integers(0, kx, n)
    ys = rng.integers(0, ky, n)
    return ContingencyTable.from_pairs((f"x{x}", f"y{y}") for x, y in zip(xs, ys))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
