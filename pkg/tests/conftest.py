import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flockbench import _pykernels

try:
    from flockbench import _ckernels
except ImportError:
    _ckernels = None

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

IMPLS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])


@pytest.fixture(params=IMPLS, ids=lambda m: m.BACKEND)
def impl(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
