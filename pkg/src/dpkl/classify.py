"""Probabilistic softmax classification over latent distributions.

The softmax head keeps one weight vector per class per particle; class scores
are the inner product of the particle-mean latent embedding with the
particle-mean class vector (exact for the linear kernel, O(m) instead of the
O(m^2) double sum). Training reuses the particle functional-gradient
machinery on the cross-entropy objective with minibatches.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import net
from .errors import ConfigError, DimensionMismatch, InsufficientData
from .threads import single_threaded_blas
from .trainer import (
    AdamState,
    EpochRecord,
    RunReport,
    TrainConfig,
    TrainData,
    _kappa_matrix,
    _pairwise_sq_dists,
    derive_seeds,
    _H_FLOOR,
)


@dataclass
class SoftmaxHead:
    """Per-particle class-weight vectors; thetas[l] has shape (C, d)."""

    C: int
    thetas: list[np.ndarray]

    @property
    def m(self) -> int:
        return len(self.thetas)

    @property
    def d(self) -> int:
        return self.thetas[0].shape[1]

    def flat(self) -> np.ndarray:
        return np.stack([t.ravel() for t in self.thetas])

    def mean_theta(self) -> np.ndarray:
        return np.mean(np.stack(self.thetas), axis=0)

    def copy(self) -> "SoftmaxHead":
        return SoftmaxHead(self.C, [t.copy() for t in self.thetas])


def init_head(C: int, d: int, m: int, seed: int) -> SoftmaxHead:
    """Gaussian head init with fan-in scaling, no bias, deterministic per seed."""
    if C < 2:
        raise ConfigError("classification needs at least two classes")
    rng = np.random.default_rng(seed)
    return SoftmaxHead(C, [rng.normal(0.0, np.sqrt(2.0 / d), size=(C, d)) for _ in range(m)])


def logits(head: SoftmaxHead, embeddings: list[np.ndarray]) -> np.ndarray:
    """Class scores (n, C): particle-mean embedding dotted with particle-mean weights.

    The double particle average of theta_c . z_i factorizes into the product
    of the two means because the score is bilinear.
    """
    Z = np.stack(embeddings)
    if Z.shape[-1] != head.d:
        raise DimensionMismatch(f"embeddings have dim {Z.shape[-1]}, head has d={head.d}")
    if Z.shape[0] != head.m:
        raise DimensionMismatch("embedding particle count does not match head")
    return Z.mean(axis=0) @ head.mean_theta().T


def softmax_probs(nu: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax."""
    nu = np.asarray(nu, dtype=np.float64)
    shifted = nu - nu.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def one_hot(labels: np.ndarray, C: int) -> np.ndarray:
    labels = np.asarray(labels)
    out = np.zeros((labels.shape[0], C))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def cross_entropy(probs: np.ndarray, onehot: np.ndarray) -> float:
    """Mean negative log probability of the true class."""
    probs = np.asarray(probs, dtype=np.float64)
    onehot = np.asarray(onehot, dtype=np.float64)
    if probs.shape != onehot.shape:
        raise DimensionMismatch(f"probs {probs.shape} vs labels {onehot.shape}")
    p_true = np.sum(probs * onehot, axis=1)
    return float(-np.mean(np.log(p_true)))


def prediction_entropy(probs: np.ndarray) -> np.ndarray:
    """Per-row entropy of the class distribution, in nats."""
    p = np.clip(probs, 1e-300, 1.0)
    return -np.sum(p * np.log(p), axis=1)


def predict_probs(
    ensemble: net.ParticleEnsemble, head: SoftmaxHead, X: np.ndarray
) -> np.ndarray:
    return softmax_probs(logits(head, net.ensemble_embeddings(ensemble, X)))


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _joint_flat(ensemble: net.ParticleEnsemble, head: SoftmaxHead) -> np.ndarray:
    return np.hstack([ensemble.flat(), head.flat()])


def _write_back(ensemble, head, flat, p_net):
    ensemble.particles = [net.unflatten_params(ensemble.arch, row[:p_net]) for row in flat]
    head.thetas = [row[p_net:].reshape(head.C, head.d).copy() for row in flat]


def _joint_median_heuristic(flat: np.ndarray) -> float:
    m = flat.shape[0]
    if m == 1:
        return 1.0
    d2 = _pairwise_sq_dists(flat)
    iu = np.triu_indices(m, k=1)
    med = float(np.median(np.sqrt(d2[iu])))
    return max(med**2 / math.log(m + 1), _H_FLOOR)


def batch_objective(
    ensemble: net.ParticleEnsemble,
    head: SoftmaxHead,
    X: np.ndarray,
    labels: np.ndarray,
    l2: float = 0.0,
) -> float:
    """Cross-entropy (plus optional head L2) on one batch; the trained scalar."""
    probs = predict_probs(ensemble, head, X)
    value = cross_entropy(probs, one_hot(labels, head.C))
    if l2 > 0:
        value += l2 * float(sum(np.sum(t * t) for t in head.thetas))
    return value


def batch_grads(
    ensemble: net.ParticleEnsemble,
    head: SoftmaxHead,
    X: np.ndarray,
    labels: np.ndarray,
    l2: float = 0.0,
) -> list[np.ndarray]:
    """Per-particle gradient of batch_objective w.r.t. the joint (w, theta) vector."""
    Z = net.ensemble_embeddings(ensemble, X)
    Z_bar = np.mean(np.stack(Z), axis=0)
    theta_bar = head.mean_theta()
    probs = softmax_probs(Z_bar @ theta_bar.T)
    E = (probs - one_hot(labels, head.C)) / X.shape[0]
    G_z = (E @ theta_bar) / head.m  # same for every particle
    g_theta_common = (E.T @ Z_bar) / head.m
    grads = []
    for p, theta in zip(ensemble.particles, head.thetas):
        g_w = net.backward_params(p, X, G_z)
        g_t = g_theta_common + (2.0 * l2 * theta if l2 > 0 else 0.0)
        grads.append(np.concatenate([g_w, np.asarray(g_t).ravel()]))
    return grads


def fit_classifier(
    data: TrainData,
    config: TrainConfig,
    trajectory_hook=None,
) -> tuple[net.ParticleEnsemble, SoftmaxHead, RunReport]:
    """Minibatch particle functional gradient descent on the cross-entropy.

    Each particle's parameter vector is its network weights concatenated with
    its class-weight matrix, so the particle kernel and median heuristic act
    on the joint space. Returns the best-validation-accuracy snapshot.
    """
    config.validate()
    if config.mode == "ssdpkl":
        raise ConfigError("ssdpkl applies to regression only")
    with single_threaded_blas():
        return _fit_classifier_loop(data, config, trajectory_hook)


def _fit_classifier_loop(data, config, trajectory_hook):
    t_start = time.perf_counter()
    X = np.asarray(data.X, dtype=np.float64)
    labels = np.asarray(data.y)
    if not np.all(labels == labels.astype(np.int64)):
        raise ConfigError("classification targets must be integer class labels")
    labels = labels.astype(np.int64)
    C = int(labels.max()) + 1
    if C < 2:
        raise InsufficientData("need at least two classes in the training data")

    seeds = derive_seeds(config.seed)
    from .trainer import _validation_split

    tr_idx, val_idx = _validation_split(X.shape[0], config.val_fraction, seeds["val_split"])
    X_tr, y_tr = X[tr_idx], labels[tr_idx]
    X_val, y_val = X[val_idx], labels[val_idx]

    arch = config.architecture(X.shape[1])
    ensemble = net.init_ensemble(arch, config.m, seeds["init"])
    head = init_head(C, config.latent_dim, config.m, seeds["rff"])
    p_net = arch.num_params
    opt = AdamState.zeros(config.m, p_net + C * config.latent_dim)

    def val_accuracy(ens, hd) -> float:
        probs = predict_probs(ens, hd, X_val)
        return float(np.mean(probs.argmax(axis=1) == y_val))

    report = RunReport(task="classification")
    best_metric = val_accuracy(ensemble, head)
    best_ens, best_head = ensemble.copy(), head.copy()
    best_epoch = 0
    if trajectory_hook is not None:
        trajectory_hook(0, ensemble, head)

    n_tr = X_tr.shape[0]
    bs = min(config.batch_size, n_tr)
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        order = np.random.default_rng([seeds["batches"], epoch]).permutation(n_tr)
        epoch_losses = []
        last_h = None
        for start in range(0, n_tr, bs):
            idx = order[start : start + bs]
            grads = batch_grads(ensemble, head, X_tr[idx], y_tr[idx], config.classifier_l2)
            flat = _joint_flat(ensemble, head)
            G = np.stack(grads)
            if config.kappa_weighting == "identity":
                phi = G
            else:
                h = (
                    config.kappa_bandwidth
                    if config.kappa_bandwidth is not None
                    else _joint_median_heuristic(flat)
                )
                phi = _kappa_matrix(flat, h) @ G
                last_h = h
            opt.t += 1
            b1, b2 = config.adam_beta1, config.adam_beta2
            opt.m1 = b1 * opt.m1 + (1.0 - b1) * phi
            opt.m2 = b2 * opt.m2 + (1.0 - b2) * phi * phi
            m_hat = opt.m1 / (1.0 - b1**opt.t)
            v_hat = opt.m2 / (1.0 - b2**opt.t)
            flat = flat - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
            _write_back(ensemble, head, flat, p_net)
            epoch_losses.append(
                batch_objective(ensemble, head, X_tr[idx], y_tr[idx], config.classifier_l2)
            )
        checked = epoch % config.early_stop_check_every == 0 or epoch == config.max_epochs
        metric = val_accuracy(ensemble, head) if checked else None
        if metric is not None and metric > best_metric:
            best_metric = metric
            best_ens, best_head = ensemble.copy(), head.copy()
            best_epoch = epoch
        report.epochs.append(
            EpochRecord(
                epoch=epoch,
                train_nll=float(np.mean(epoch_losses)),
                objective=float(np.mean(epoch_losses)),
                val_metric=metric,
                h_kappa=last_h,
                jitter=0.0,
                seconds=time.perf_counter() - t0,
            )
        )
        if trajectory_hook is not None:
            trajectory_hook(epoch, ensemble, head)

    report.best_epoch = best_epoch
    report.best_val_metric = best_metric
    report.final_train_nll = report.epochs[-1].train_nll if report.epochs else math.nan
    report.final_objective = report.final_train_nll
    report.total_seconds = time.perf_counter() - t_start
    return best_ens, best_head, report
