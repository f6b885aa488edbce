"""Grid-based multi-target tracking from superposed signal-strength readings."""

import os

# The matrices here are at most a few hundred square; threaded BLAS spends
# more time synchronizing than computing at that size. Default to one thread
# unless the user has already chosen.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
del _var

__version__ = "0.1.0"

from . import (association, assignment, config, estimation, grid, hmm, iekf,
               kalman, metrics, sim, solver)

__all__ = ["association", "assignment", "config", "estimation", "grid", "hmm",
           "iekf", "kalman", "metrics", "sim", "solver", "__version__"]
