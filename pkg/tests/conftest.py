import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_skew(rng, n):
    A = rng.standard_normal((n, n))
    return A - A.T


def random_frame(rng, d, n):
    """Orthonormal d-frame of skew matrices, built without the package."""
    mats = np.array([random_skew(rng, n) for _ in range(d)]).reshape(d, -1)
    Q, _ = np.linalg.qr(mats.T)
    return Q.T.reshape(d, n, n)
