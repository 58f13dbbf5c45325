"""Shared fixtures: calibrated parameter sets reused across the suite."""

import pytest

from bigjump.model import ModelParams, calibrate


@pytest.fixture(scope="session")
def params() -> ModelParams:
    """Default calibration: b = 0.5, epsilon = 1."""
    return calibrate(0.5, 1.0, tolerance=1e-10)


@pytest.fixture(scope="session")
def params_b02() -> ModelParams:
    return calibrate(0.2, 1.0, tolerance=1e-10)


@pytest.fixture(scope="session")
def params_b08() -> ModelParams:
    return calibrate(0.8, 1.0, tolerance=1e-10)
