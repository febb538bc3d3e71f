import numpy as np
import pytest

from trimfit.models import CameraModel, ScenarioConfig
from trimfit.services.synthbench import generate_scene


@pytest.fixture
def cam():
    return CameraModel()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def make_scene(cam):
    """Scene factory: make_scene(n=50, noise=0.0, outlier_frac=0.0, seed=0, trial=0)"""

    def _make(n=50, noise=0.0, outlier_frac=0.0, seed=0, trial=0, noise_model="uniform"):
        scenario = ScenarioConfig(n=n, noise=noise, outlier_frac=outlier_frac, seed=seed, noise_model=noise_model)
        return generate_scene(scenario, cam, trial)

    return _make
