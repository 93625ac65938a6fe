from __future__ import annotations

import numpy as np
import pytest

from carryover import Dataset, EstimandSpec, Support

REFERENCE_PAIRS = [(-0.217, 0.055), (0.118, -0.015), (-0.402, 0.023)]


def categorical_dataset(n: int, seed: int, l_levels: int = 2, y_levels: int = 3) -> Dataset:
    """Random data with categorical L1 and Y whose distributions depend on the history."""
    rng = np.random.default_rng(seed)
    a0 = rng.integers(0, 2, n)
    l1 = np.minimum(rng.binomial(l_levels - 1, 0.3 + 0.4 * a0), l_levels - 1)
    a1 = (rng.random(n) < 0.3 + 0.4 * (l1 > 0)).astype(int)
    p_high = np.clip(0.15 + 0.2 * a0 + 0.25 * a1 + 0.1 * l1, 0, 1)
    y = rng.binomial(y_levels - 1, p_high)
    return Dataset(a0, l1, a1, y, Support.categorical(l_levels), Support.categorical(y_levels))


@pytest.fixture
def estimand() -> EstimandSpec:
    return EstimandSpec.default()


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
