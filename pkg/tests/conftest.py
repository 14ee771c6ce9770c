from __future__ import annotations

import numpy as np
import pytest

from capstream.detector import DetectorConfig
from capstream.dsp import DspConfig
from capstream.simulate import PhysicsParams, generate_session


@pytest.fixture(scope="session")
def params() -> PhysicsParams:
    return PhysicsParams()


@pytest.fixture(scope="session")
def dsp_cfg() -> DspConfig:
    return DspConfig()


@pytest.fixture(scope="session")
def det_cfg() -> DetectorConfig:
    return DetectorConfig()


@pytest.fixture(scope="session")
def session_10(params):
    """One 10-gesture recording at 53 Hz (one event per class)."""
    return generate_session(seed=7, n_per_class=1, params=params, sampling_rate=53.0)


def assert_streams_equal(a, b):
    assert a.sampling_rate == b.sampling_rate
    np.testing.assert_array_equal(a.values, b.values)
