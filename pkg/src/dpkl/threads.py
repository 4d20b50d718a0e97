"""BLAS threading control for the training loops.

The workload is many small matrix products (latent dims of 2, feature counts
of ~100, particle blocks of ~50 rows); threaded BLAS loses badly to its own
dispatch overhead there and can reorder reductions. Training paths therefore
pin BLAS to one thread, which also keeps repeated runs bitwise identical
regardless of the host's core count.
"""

from __future__ import annotations

from contextlib import nullcontext

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover - optional dependency
    threadpool_limits = None


def single_threaded_blas():
    """Context manager limiting BLAS pools to one thread (no-op if unavailable)."""
    if threadpool_limits is None:
        return nullcontext()
    return threadpool_limits(limits=1, user_api="blas")
