import pytest

from partsel import PrivacyParams

GRID_EPS = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0]
GRID_DELTA = [1e-12, 1e-10, 1e-5, 1e-2]


@pytest.fixture(scope="session")
def budget_grid() -> list[PrivacyParams]:
    """The 24-point (epsilon, delta) grid used by the equivalence suites."""
    return [PrivacyParams(eps, delta) for eps in GRID_EPS for delta in GRID_DELTA]
