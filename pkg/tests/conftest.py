import os

import pytest
from hypothesis import HealthCheck, settings

FIXTURES = os.path.join(os.path.dirname(__file__), os.pardir, "src", "probprog", "fixtures")

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def fixture_path(*parts):
    return os.path.normpath(os.path.join(FIXTURES, *parts))


def read_fixture(*parts):
    with open(fixture_path(*parts), encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture
def fixtures_dir():
    return os.path.normpath(FIXTURES)
