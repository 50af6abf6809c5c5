import math

import pytest
from hypothesis import HealthCheck, settings

from collapse_lab import catalog

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CATALOG_CASES = [
    ("sphere_1d", {}),
    ("cylinder_1d", {}),
    ("plane_1d", {}),
    ("fubini_study", {}),
    ("hitchin", {"s": 0.1, "n": 2}),
    ("eguchi_hanson", {"a": 1.0}),
    ("berger", {"lambda": 0.5}),
    ("fubini_study_potential", {}),
    ("flat_potential", {}),
]


@pytest.fixture(scope="session")
def sphere():
    return catalog.instantiate("sphere_1d")


@pytest.fixture(scope="session")
def fs():
    return catalog.instantiate("fubini_study")


@pytest.fixture(scope="session")
def fs_potential():
    return catalog.instantiate("fubini_study_potential")


@pytest.fixture(scope="session")
def flat_potential():
    return catalog.instantiate("flat_potential")


@pytest.fixture(scope="session")
def hitchin():
    return catalog.instantiate("hitchin", {"s": 0.1, "n": 2})


@pytest.fixture(scope="session")
def eh():
    return catalog.instantiate("eguchi_hanson", {"a": 1.0})


@pytest.fixture(scope="session")
def berger():
    return catalog.instantiate("berger", {"lambda": 0.5})


def interior(metric, k=20):
    lo, hi = metric.domain
    top = hi if math.isfinite(hi) else lo + 10.0
    return [lo + (top - lo) * (j + 1) / (k + 1) for j in range(k)]
