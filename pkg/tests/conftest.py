import sys
from pathlib import Path

import numpy as np
import pytest

root_dir = Path(__file__).parent.parent

sys.path.insert(0, str(root_dir))

from schrolab.field_core import Boundary, make_grid  # noqa: E402
from schrolab.structures import SchrodingerOperator  # noqa: E402


@pytest.fixture
def rng():
    """Seeded generator; every test gets the same stream"""
    return np.random.default_rng(1234)


@pytest.fixture
def periodic_grid():
    return make_grid(20.0, 128, Boundary.PERIODIC, -10.0)


@pytest.fixture
def decaying_grid():
    return make_grid(20.0, 256, Boundary.DECAYING)


@pytest.fixture
def harmonic(periodic_grid):
    """ℋ = −½∂² + ½x² on the periodic test grid"""
    return SchrodingerOperator.harmonic(periodic_grid, 1.0, 1.0, 1.0)


@pytest.fixture
def write_config(tmp_path):
    """Write an experiment file into tmp_path and return its path"""

    def write(content: str, name: str = "experiment.ini") -> Path:
        path = tmp_path / name
        path.write_text(content, encoding="utf-8")
        return path

    return write


LSE_CONFIG = """
[experiment]
equation = lse

[grid]
length = 20.0
points = 128

[physics]
potential = harmonic(1.0)

[initial]
state = gaussian(1.0, 1.0, 0.0)

[integrator]
dt = 1e-3
steps = 200
stride = 50
"""

NLS_CONFIG = """
[experiment]
equation = nls

[grid]
length = 30.0
points = 256

[physics]
hbar = 1.0
mass = 0.5
b = -2.0

[initial]
state = sech(1.0, 1.0, 0.0)

[integrator]
dt = 1e-3
steps = 200
stride = 100
"""


@pytest.fixture
def lse_config(write_config):
    return write_config(LSE_CONFIG, "lse.ini")


@pytest.fixture
def nls_config(write_config):
    return write_config(NLS_CONFIG, "nls.ini")
