from __future__ import annotations

import sys

import numpy as np
import pytest

from gagliardo import GridFunction, GridSpec


@pytest.fixture
def three_cells() -> GridFunction:
    return GridFunction(GridSpec((-1.0,), 1.0, (5,)), [0.0, 3.0, 1.0, 2.0, 0.0])


def hat(h: float, width: float = 0.25, lo: float = -1.0, hi: float = 1.0) -> GridFunction:
    grid = GridSpec.covering((lo,), (hi,), h)
    x = grid.centers()[:, 0]
    return GridFunction(grid, np.maximum(0.0, 1.0 - np.abs(x) / width))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
