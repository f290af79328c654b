from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from bdmaps import BoundaryAngles, Potential  # noqa: E402

PI = math.pi
DIR = BoundaryAngles(0.0, 0.0)
NEU = BoundaryAngles(PI / 2, PI / 2)
QUARTER = BoundaryAngles(PI / 4, PI / 4)


@pytest.fixture
def zero():
    return Potential.zero()


@pytest.fixture
def cosine():
    return Potential.cosine()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance lines, filled by test_acceptance and printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
