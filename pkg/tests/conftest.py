import numpy as np
import pytest

from dermacal.simulate import default_cohort_config, default_device_models, generate_cohort


@pytest.fixture(scope="session")
def default_cohort():
    """The calibrated 200-subject cohort at seed 42 (shared across tests)."""
    cfg = default_cohort_config(subject_count=200, seed=42)
    return generate_cohort(cfg, default_device_models())


@pytest.fixture(scope="session")
def small_cohort():
    """A cheap 12-subject cohort for structural tests."""
    cfg = default_cohort_config(subject_count=12, seed=7)
    return generate_cohort(cfg, default_device_models())


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)
