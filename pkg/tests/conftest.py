"""Keep BLAS single-threaded for the whole suite.

Must run before numpy initializes its thread pools: the suite's matrices are
small, threaded BLAS only adds dispatch overhead here, and single-threaded
reductions keep the bitwise-determinism tests meaningful.
"""

import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")
