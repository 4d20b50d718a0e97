"""Shared oracles for the test suite: finite differences and brute-force sums."""

import numpy as np

from dpkl import net
from dpkl.kernels import base_kernel


def det_cofactor(a: np.ndarray) -> float:
    """Determinant by cofactor expansion along the first row (oracle, n <= ~6)."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(a, 0, axis=0), j, axis=1)
        total += (-1.0) ** j * a[0, j] * det_cofactor(minor)
    return total


def kernel_quad_loop(spec, embeddings_a, embeddings_b) -> np.ndarray:
    """Quadruple-loop reference for the double particle-average kernel block."""
    m = len(embeddings_a)
    na, nb = embeddings_a[0].shape[0], embeddings_b[0].shape[0]
    K = np.zeros((na, nb))
    for i in range(na):
        for j in range(nb):
            acc = 0.0
            for Za in embeddings_a:
                for Zb in embeddings_b:
                    acc += base_kernel(spec, Za[i], Zb[j])
            K[i, j] = acc / m**2
    return K


def fd_gradient(f, w0: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of a flat vector."""
    g = np.zeros_like(w0)
    for j in range(w0.size):
        wp, wm = w0.copy(), w0.copy()
        wp[j] += step
        wm[j] -= step
        g[j] = (f(wp) - f(wm)) / (2.0 * step)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """L2 relative error of a against reference b."""
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def particle_fd_gradient(ensemble, l: int, objective, step: float = 1e-5) -> np.ndarray:
    """Finite differences of objective(ensemble) w.r.t. particle l alone."""
    arch = ensemble.arch
    w0 = ensemble.particles[l].flatten()

    def f(w):
        ensemble.particles[l] = net.unflatten_params(arch, w)
        try:
            return objective()
        finally:
            ensemble.particles[l] = net.unflatten_params(arch, w0)

    return fd_gradient(f, w0, step)
