import numpy as np
import pytest


@pytest.fixture
def rng(request):
    # per-test deterministic seed derived from the test name
    seed = sum(ord(c) for c in request.node.name) * 7919
    return np.random.default_rng(seed)
