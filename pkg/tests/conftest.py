import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hardsphere_bbgky.dynamics import Configuration  # noqa: E402
from hardsphere_bbgky.functionals import SamplingSpec  # noqa: E402
from hardsphere_bbgky.harness.config import RunConfig  # noqa: E402


@pytest.fixture
def head_on():
    """Two spheres meeting at t = 0.5 halfway between them."""
    return Configuration([[4.0, 5.0, 5.0], [6.0, 5.0, 5.0]], [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]], 1.0)


@pytest.fixture
def receding():
    return Configuration([[4.0, 5.0, 5.0], [6.0, 5.0, 5.0]], [[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]], 1.0)


@pytest.fixture
def single():
    return Configuration([[5.2, 4.9, 5.1]], [[0.7, -0.3, 0.2]], 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def spec():
    return SamplingSpec(sigma=1.0, box_length=10.0, beta=1.0, position_law="normal", position_width=1.2)


@pytest.fixture
def small_config(tmp_path):
    """Desk-scale run: three particles, few samples, short times."""
    return RunConfig(
        N_max=3,
        n_samples=400,
        n_max=2,
        times=[0.0, 0.3],
        s_values=[1, 2],
        n_random_points=2,
        n_duality_pairs=1,
        quadrature_nodes=4,
        out=str(tmp_path / "out"),
    )
