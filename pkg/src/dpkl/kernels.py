"""Kernels over latent probability distributions.

A point x maps, through every particle, to a cloud of latent points; the
distributional kernel between two points is the double particle-average of a
base RBF kernel over their clouds. Two evaluation routes are provided:

* exact: the full double sum, O(m^2 n^2) — ground truth and test oracle;
* random Fourier features: a factor R with R R^T ~= K, O(n m q) to build.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

# Above this many stacked rows (m*n) the exact kernel falls back to a
# per-particle-pair loop to bound memory at O(n^2) per block.
_STACK_LIMIT = 4096


@dataclass(frozen=True)
class LatentKernelSpec:
    """Amplitude and bandwidth of the base RBF kernel k(z, z') = a exp(-|z-z'|^2 / 2h^2)."""

    amplitude: float = 0.5
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.amplitude <= 0 or self.bandwidth <= 0:
            raise ValueError("amplitude and bandwidth must be positive")


@dataclass(frozen=True)
class RffBasis:
    """Random Fourier basis: q frequencies (rows of V) and phases in [0, 2pi)."""

    V: np.ndarray  # (q, d)
    b: np.ndarray  # (q,)
    seed: int

    @property
    def q(self) -> int:
        return self.V.shape[0]

    @property
    def d(self) -> int:
        return self.V.shape[1]


def base_kernel(spec: LatentKernelSpec, z: np.ndarray, z2: np.ndarray) -> float:
    """Base RBF kernel between two latent points."""
    z = np.asarray(z, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if z.shape != z2.shape:
        raise DimensionMismatch(f"latent points differ in shape: {z.shape} vs {z2.shape}")
    d2 = float(np.sum((z - z2) ** 2))
    return spec.amplitude * np.exp(-d2 / (2.0 * spec.bandwidth**2))


def base_kernel_grad(spec: LatentKernelSpec, z: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Gradient of the base kernel in its first argument: -k(z,z') (z-z') / h^2."""
    z = np.asarray(z, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    k = base_kernel(spec, z, z2)
    return -k * (z - z2) / spec.bandwidth**2


def _pairwise_sq_dists(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows of u and rows of v."""
    uu = np.sum(u * u, axis=1)[:, None]
    vv = np.sum(v * v, axis=1)[None, :]
    d2 = uu + vv - 2.0 * (u @ v.T)
    return np.maximum(d2, 0.0)


def _kernel_block(spec: LatentKernelSpec, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Base-kernel matrix between two sets of latent points."""
    return spec.amplitude * np.exp(-_pairwise_sq_dists(u, v) / (2.0 * spec.bandwidth**2))


def _check_embeddings(embeddings: list[np.ndarray]) -> tuple[int, int]:
    if not embeddings:
        raise DimensionMismatch("need at least one particle embedding")
    n, d = embeddings[0].shape
    for Z in embeddings:
        if Z.shape != (n, d):
            raise DimensionMismatch("all particle embeddings must share one shape")
    return n, d


def empirical_cross_block(
    spec: LatentKernelSpec,
    embeddings_a: list[np.ndarray],
    embeddings_b: list[np.ndarray],
) -> np.ndarray:
    """Double particle-average kernel block between two point sets.

    Entry (i, j) is (1/m^2) sum_{l,l'} k(za_i^(l), zb_j^(l')). Particle sums
    run in index order, so results are deterministic.
    """
    na, d = _check_embeddings(embeddings_a)
    nb, d2 = _check_embeddings(embeddings_b)
    if d != d2:
        raise DimensionMismatch("latent dimensions differ between point sets")
    m = len(embeddings_a)
    if len(embeddings_b) != m:
        raise DimensionMismatch("both sides must come from the same particle count")
    if m * max(na, nb) <= _STACK_LIMIT:
        A = np.concatenate(embeddings_a, axis=0)  # (m*na, d), particle-major
        B = np.concatenate(embeddings_b, axis=0)
        big = _kernel_block(spec, A, B)
        return big.reshape(m, na, m, nb).sum(axis=(0, 2)) / m**2
    out = np.zeros((na, nb))
    for Za in embeddings_a:
        for Zb in embeddings_b:
            out += _kernel_block(spec, Za, Zb)
    return out / m**2


def empirical_kernel_exact(
    spec: LatentKernelSpec, embeddings: list[np.ndarray]
) -> np.ndarray:
    """The n x n distributional kernel matrix, symmetrized against round-off."""
    K = empirical_cross_block(spec, embeddings, embeddings)
    return 0.5 * (K + K.T)


def cross_kernel(
    spec: LatentKernelSpec,
    train_embeddings: list[np.ndarray],
    query_embeddings: list[np.ndarray],
) -> tuple[np.ndarray, float]:
    """(k_*, k_**) for a single query point.

    ``query_embeddings`` holds the particle images of one point, each (1, d).
    k_*[i] averages the base kernel between training point i and the query over
    all particle pairs; k_** is the query's self-average.
    """
    nq, _ = _check_embeddings(query_embeddings)
    if nq != 1:
        raise DimensionMismatch("cross_kernel takes a single query point")
    k_star = empirical_cross_block(spec, train_embeddings, query_embeddings)[:, 0]
    k_ss = float(empirical_cross_block(spec, query_embeddings, query_embeddings)[0, 0])
    return k_star, k_ss


def cross_kernel_batch(
    spec: LatentKernelSpec,
    train_embeddings: list[np.ndarray],
    query_embeddings: list[np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """(K_*, k_**) for many query points: K_* is (n_q, n), k_** is (n_q,).

    k_** entries are the per-query self-averages, i.e. the diagonal of the
    query block — not the full query kernel matrix.
    """
    K_star = empirical_cross_block(spec, query_embeddings, train_embeddings)
    m = len(query_embeddings)
    nq, _ = _check_embeddings(query_embeddings)
    k_ss = np.zeros(nq)
    for Za in query_embeddings:
        for Zb in query_embeddings:
            d2 = np.sum((Za - Zb) ** 2, axis=1)
            k_ss += spec.amplitude * np.exp(-d2 / (2.0 * spec.bandwidth**2))
    return K_star, k_ss / m**2


def sample_rff_basis(
    spec: LatentKernelSpec, d: int, q: int, seed: int
) -> RffBasis:
    """Draw a Fourier basis for the base kernel, deterministically per seed.

    Frequencies are i.i.d. N(0, I/h^2) — the spectral density of the RBF with
    bandwidth h — and phases are uniform on [0, 2pi). Frequencies are drawn
    first, then phases, from one generator.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    rng = np.random.default_rng(seed)
    V = rng.normal(0.0, 1.0 / spec.bandwidth, size=(q, d))
    b = rng.uniform(0.0, 2.0 * np.pi, size=q)
    return RffBasis(V=V, b=b, seed=seed)


def rff_feature_matrix(
    basis: RffBasis, embeddings: list[np.ndarray], spec: LatentKernelSpec
) -> np.ndarray:
    """Particle-averaged feature matrix R (n, q) with R R^T ~= the exact kernel.

    R_ij = sqrt(a) * (1/m) * sum_l sqrt(2/q) cos(v_j . z_i^(l) + b_j); the
    sqrt(a) factor carries the kernel amplitude into the factorization.
    """
    n, d = _check_embeddings(embeddings)
    if d != basis.d:
        raise DimensionMismatch(
            f"basis dimension {basis.d} does not match embeddings dimension {d}"
        )
    m = len(embeddings)
    scale = np.sqrt(spec.amplitude) * np.sqrt(2.0 / basis.q) / m
    R = np.zeros((n, basis.q))
    for Z in embeddings:
        R += np.cos(Z @ basis.V.T + basis.b)
    return scale * R


def rff_embedding_cotangents(
    basis: RffBasis,
    embeddings: list[np.ndarray],
    spec: LatentKernelSpec,
    T: np.ndarray,
) -> list[np.ndarray]:
    """Chain a cotangent on R back to each particle's embedding matrix.

    Given T = dJ/dR for R = rff_feature_matrix(...), returns G^(l) (n, d) with
    G^(l) = -(sqrt(a) sqrt(2/q) / m) (T * sin(Z^(l) V^T + b)) V.
    """
    n, d = _check_embeddings(embeddings)
    T = np.asarray(T, dtype=np.float64)
    if T.shape != (n, basis.q):
        raise DimensionMismatch(f"cotangent shape {T.shape} != {(n, basis.q)}")
    m = len(embeddings)
    scale = -np.sqrt(spec.amplitude) * np.sqrt(2.0 / basis.q) / m
    return [scale * ((T * np.sin(Z @ basis.V.T + basis.b)) @ basis.V) for Z in embeddings]


def kernel_embedding_cotangents(
    spec: LatentKernelSpec,
    embeddings: list[np.ndarray],
    C: np.ndarray,
) -> list[np.ndarray]:
    """Chain a cotangent on the exact kernel matrix back to the embeddings.

    Given C = dJ/dK for K = empirical_kernel_exact over one point set (C need
    not be symmetric; both index slots are accounted for), returns per-particle
    G^(l) (n, d):

        G^(l)[i] = (1/m^2) sum_{j,l'} (C_ij + C_ji) * dk/dz (z_i^(l), z_j^(l')).
    """
    n, d = _check_embeddings(embeddings)
    C = np.asarray(C, dtype=np.float64)
    if C.shape != (n, n):
        raise DimensionMismatch(f"cotangent shape {C.shape} != {(n, n)}")
    Csym = C + C.T
    h2 = spec.bandwidth**2
    m = len(embeddings)
    out = []
    for Zl in embeddings:
        G = np.zeros((n, d))
        for Zl2 in embeddings:
            M = Csym * _kernel_block(spec, Zl, Zl2)
            G += M.sum(axis=1)[:, None] * Zl - M @ Zl2
        out.append(-G / (m**2 * h2))
    return out
