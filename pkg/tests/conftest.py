import pytest

from gaitlearn.dynamics import PhysicalParams, simulate
from gaitlearn.fpf import FilterSettings
from gaitlearn.phase import PhaseModel
from gaitlearn.qlearn import LearnConfig
from gaitlearn.sensor import SensorConfig


@pytest.fixture(scope="session")
def params():
    return PhysicalParams()


@pytest.fixture(scope="session")
def phase_model():
    return PhaseModel(r=0.56, omega0=1.0)


@pytest.fixture(scope="session")
def sensor_cfg():
    return SensorConfig(sigma_w=0.1, dt=0.01)


@pytest.fixture(scope="session")
def settled_traj(params):
    """50 uncontrolled periods from rest; shared by dynamics and phase tests."""
    return simulate(params, t_end=50.0 * params.period, dt=0.01)


@pytest.fixture
def small_filter():
    return FilterSettings(n_particles=100, delta=0.12)


@pytest.fixture
def fast_learn():
    """Tiny horizon for smoke tests of the training loop."""
    return LearnConfig(horizon_periods=4.0, estimator_warmup_periods=1.0)
