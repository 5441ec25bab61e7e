import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rice_game.params import GeneratorConfig, default_params, generate_exogenous  # noqa: E402

ACCEPTANCE_LINES = []


def make_instance(T, regions=None):
    params = default_params(T)
    exo = generate_exogenous(GeneratorConfig(), params.horizon)
    if regions is not None:
        params = params.subset(regions)
        exo = exo.subset(regions)
    return params, exo


@pytest.fixture
def small():
    """12 regions, T = 5."""
    return make_instance(5)


@pytest.fixture
def tiny():
    """Two regions (US, CN), T = 2."""
    return make_instance(2, [0, 5])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
