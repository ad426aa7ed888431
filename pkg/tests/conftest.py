import math
from pathlib import Path

import numpy as np
import pytest

from offres.model import LevelSystem
from offres.seeding import named_rng, phase_pattern_couplings

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

# Filled by tests/test_acceptance.py, printed at the end of the session.
ACCEPTANCE_LINES = []


def reference_couplings(n, seed=42):
    return phase_pattern_couplings(named_rng(seed, "couplings"), n, 0.01)


def reference_system():
    return LevelSystem([0.0, 1.0, 10.0], reference_couplings(3), "reference three-level")


def sweep_system():
    return LevelSystem([0.0, 1.0, 10.3], reference_couplings(3), "scaling three-level")


SWEEP_T0 = 4 * math.pi


@pytest.fixture
def ref_system():
    return reference_system()


@pytest.fixture
def four_level():
    return LevelSystem([0.0, 1.0, 9.0, 17.0], reference_couplings(4), "seeded four-level")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
