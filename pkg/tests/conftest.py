"""Shared fixtures and the --runslow switch for full-size runs."""

import numpy as np
import pytest

from src.projector import ProjectionConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-size (512 px) tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fast_solver():
    """Short fixed-point budget for small grids."""
    return ProjectionConfig(max_iterations=300, tolerance=1e-4)
