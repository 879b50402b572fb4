import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from mimo_hcrb.scenario import SignalModel, circular_layout  # noqa: E402

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")

ACCEPTANCE_LINES = []


@pytest.fixture
def report_line():
    def add(line):
        ACCEPTANCE_LINES.append(line)
        print(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def ghz_signal():
    return SignalModel(carrier_hz=1e9, bandwidth_hz=1e6, snr=10.0)


@pytest.fixture
def circle_scenario(ghz_signal):
    """11 transmitters and 9 receivers on a 10 km circle around the target."""
    return circular_layout(11, 9, 10e3, ghz_signal, sigma_delta_sq=5e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(20090101)
