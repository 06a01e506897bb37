import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hsmor.metrics import MetricSpec, ObjectConfig
from hsmor.scan import ScanGrid, scan

settings.register_profile(
    "repo", deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

TWO_FO = ObjectConfig(("A", "B", "Dr"), ((1, 1, 0), (0, 0, 1), (0.5, 0.5, 0.5)))
FIG4_GRID = ScanGrid.plane("z", 0.5, ((-3.0, 4.0), (-3.0, 4.0)), 256)


@pytest.fixture(scope="session")
def two_fo():
    return TWO_FO


@pytest.fixture(scope="session")
def fig4_field():
    """The 256x256 two-object Euclidean cross-section at z = 0.5."""
    return scan(TWO_FO, MetricSpec(), FIG4_GRID)


@pytest.fixture(scope="session")
def coarse_field():
    return scan(TWO_FO, MetricSpec(), FIG4_GRID.with_steps(64))


def random_similarity(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.uniform(0.01, 0.99, (n, n))
    s = (a + a.T) / 2.0
    np.fill_diagonal(s, 1.0)
    return s
