import os

import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile(
    "lab", max_examples=int(os.environ.get("LAB_HYPOTHESIS_EXAMPLES", "50")),
    deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("lab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
