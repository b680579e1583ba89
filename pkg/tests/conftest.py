import functools
import json
import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

# derandomised so that repeated runs exercise the same examples
settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@functools.lru_cache(maxsize=None)
def _load(name):
    with open(os.path.join(FIXTURES, name)) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def reference():
    return _load("reference.json")


@functools.lru_cache(maxsize=None)
def _model(eps):
    from finsler_twist.finsler import FinslerModel
    from finsler_twist.suspension import SuspensionSpec

    return FinslerModel.build(SuspensionSpec(eps))


@pytest.fixture(scope="session")
def model():
    """Factory: model(epsilon) -> cached FinslerModel with default constants."""
    return _model
