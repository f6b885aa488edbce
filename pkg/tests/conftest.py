import os

# keep BLAS single-threaded before numpy loads anywhere; the test matrices
# are small enough that thread synchronization dominates otherwise
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_spd(rng, n, scale=1.0):
    """Well-conditioned random symmetric positive-definite matrix."""
    M = rng.normal(size=(n, n))
    return scale * (M @ M.T / n + np.eye(n))
