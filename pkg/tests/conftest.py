"""
    Shared fixtures for ccf_el.

    Tests marked ``slow`` reproduce the simulation designs at desk scale and only run with ``pytest --slow``.
"""

import pytest

from . import factories


def pytest_addoption(parser):
    parser.addoption("--slow", action="store_true", default=False, help="run the slow Monte-Carlo tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def vsk_path():
    return factories.SamplePath(spec=factories.ModelSpec(kind="VSK"), n=300, path_seed=11)


@pytest.fixture
def cir_path():
    return factories.SamplePath(spec=factories.ModelSpec(kind="CIR"), n=300, path_seed=12)
