"""GP marginal likelihood, posterior prediction, and the variance regularizer.

A GpState freezes everything prediction needs: the kernel representation
(dense matrix or RFF factor), the Cholesky factor of K + sigma^2 I, and the
solve vector alpha. States are immutable once assembled; posterior queries
may share one state freely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatch,
    EmptyUnlabeledSet,
    InternalConsistencyError,
    ModeMismatch,
    NotPositiveDefinite,
)

# Posterior variance more negative than this is a genuine inconsistency, not
# floating-point cancellation.
_VARIANCE_SLACK = -1e-8


@dataclass(frozen=True)
class GpState:
    """Assembled GP over n training points.

    mode is "exact" (K is the dense kernel) or "rff" (R is the feature factor
    and the effective kernel is R R^T). noise_var may be 0 for oracle checks
    on strictly positive-definite kernels.
    """

    mode: str
    K: np.ndarray | None
    R: np.ndarray | None
    noise_var: float
    chol: linalg.CholFactor
    alpha: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.y.shape[0]


def _assemble(mode, K, R, A, y, noise_var, base_jitter) -> GpState:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if A.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"kernel dim {A.shape[0]} != target dim {y.shape[0]}")
    f = linalg.cholesky(A, base_jitter)
    alpha = linalg.solve_chol(f, y)
    return GpState(mode=mode, K=K, R=R, noise_var=noise_var, chol=f, alpha=alpha, y=y)


def gp_state_exact(
    K: np.ndarray, y: np.ndarray, noise_var: float = 0.1, base_jitter: float = 1e-8
) -> GpState:
    """Build a state from a dense distributional kernel matrix."""
    if noise_var < 0:
        raise ValueError("noise_var must be >= 0")
    K = linalg.check_symmetric(K)
    A = K + noise_var * np.eye(K.shape[0])
    return _assemble("exact", K, None, A, y, noise_var, base_jitter)


def gp_state_rff(
    R: np.ndarray, y: np.ndarray, noise_var: float = 0.1, base_jitter: float = 1e-8
) -> GpState:
    """Build a state from an RFF factor; the kernel is R R^T."""
    if noise_var < 0:
        raise ValueError("noise_var must be >= 0")
    R = np.asarray(R, dtype=np.float64)
    A = R @ R.T + noise_var * np.eye(R.shape[0])
    return _assemble("rff", None, R, A, y, noise_var, base_jitter)


def nll(state: GpState) -> float:
    """Negative log marginal likelihood, constant term excluded.

    0.5 * y^T alpha + 0.5 * logdet(K + sigma^2 I); the (n/2) log 2pi constant
    is omitted everywhere, consistently.
    """
    return float(0.5 * state.y @ state.alpha + 0.5 * linalg.logdet_chol(state.chol))


def nll_grad_kernel(state: GpState) -> np.ndarray:
    """d nll / d K = 0.5 ((K + sigma^2 I)^{-1} - alpha alpha^T), symmetric."""
    Ainv = linalg.inv_chol(state.chol)
    S = 0.5 * (Ainv - np.outer(state.alpha, state.alpha))
    return 0.5 * (S + S.T)


def nll_grad_rff(state: GpState) -> np.ndarray:
    """d nll / d R = 2 (d nll / d K) R for K = R R^T."""
    if state.mode != "rff":
        raise ModeMismatch("nll_grad_rff requires an rff-mode state")
    return 2.0 * nll_grad_kernel(state) @ state.R


@dataclass(frozen=True)
class PredictiveDistribution:
    """Posterior mean and latent variance at one query (normalized target units)."""

    mean: float
    variance: float


def _clamp_variance(v: float) -> float:
    if v < _VARIANCE_SLACK:
        raise InternalConsistencyError(f"posterior variance {v:.3e} below tolerance")
    return max(v, 0.0)


def posterior(state: GpState, k_star: np.ndarray, k_ss: float) -> PredictiveDistribution:
    """GP posterior at one query: mean k_*^T alpha, variance k_** - k_*^T A^{-1} k_*."""
    k_star = np.asarray(k_star, dtype=np.float64).reshape(-1)
    if k_star.shape[0] != state.n:
        raise DimensionMismatch(f"k_star has length {k_star.shape[0]}, state has n={state.n}")
    if k_ss < 0:
        raise ValueError("k_ss must be >= 0")
    mean = float(k_star @ state.alpha)
    var = float(k_ss - k_star @ linalg.solve_chol(state.chol, k_star))
    return PredictiveDistribution(mean=mean, variance=_clamp_variance(var))


def posterior_batch(
    state: GpState, K_star: np.ndarray, k_ss: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized posterior over rows of K_star (n_q, n); returns (means, variances)."""
    K_star = np.asarray(K_star, dtype=np.float64)
    k_ss = np.asarray(k_ss, dtype=np.float64).reshape(-1)
    if K_star.ndim != 2 or K_star.shape[1] != state.n or K_star.shape[0] != k_ss.shape[0]:
        raise DimensionMismatch("K_star/k_ss shapes inconsistent with the state")
    means = K_star @ state.alpha
    B = linalg.solve_chol(state.chol, K_star.T)  # (n, n_q)
    variances = k_ss - np.sum(K_star.T * B, axis=0)
    return means, np.array([_clamp_variance(float(v)) for v in variances])


def variance_regularizer(
    state: GpState, unlabeled_cross: list[tuple[np.ndarray, float]]
) -> float:
    """Sum of posterior variances over unlabeled points.

    The caller applies the alpha/n_u weight of the semi-supervised objective.
    """
    if len(unlabeled_cross) == 0:
        raise EmptyUnlabeledSet("variance regularizer needs at least one unlabeled point")
    total = 0.0
    for k_star, k_ss in unlabeled_cross:
        total += posterior(state, k_star, k_ss).variance
    return total


def projection_residual_oracle(K: np.ndarray, k_star: np.ndarray, k_ss: float) -> float:
    """Squared RKHS distance from a query embedding to the labeled span.

    Computed by explicit Gram algebra as k_** - k_*^T K^{-1} k_* with no noise
    term; K must be invertible. Exists solely as an independent check that the
    posterior variance equals this projection residual.
    """
    K = linalg.check_symmetric(K)
    k_star = np.asarray(k_star, dtype=np.float64).reshape(-1)
    if k_star.shape[0] != K.shape[0]:
        raise DimensionMismatch("k_star length does not match K")
    try:
        f = linalg.cholesky(K, base_jitter=0.0)
    except NotPositiveDefinite:
        raise NotPositiveDefinite("labeled Gram matrix is singular; projection undefined")
    return float(k_ss - k_star @ linalg.solve_chol(f, k_star))
