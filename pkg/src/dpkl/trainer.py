"""Particle functional gradient descent on the (regularized) GP likelihood.

Each iteration computes every particle's gradient of the scalar objective,
mixes the raw gradients with an RBF kernel over parameter vectors (bandwidth
from the median heuristic), and applies one Adam update per particle. With a
single particle this is exactly gradient descent on the GP likelihood, i.e.
the deterministic deep-kernel baseline.

Three training modes:
  dpkl   — minimize the GP negative log likelihood over labeled data;
  ssdpkl — minimize (1/n_l) nll + (alpha/n_u) * sum of posterior variances
           over an unlabeled pool;
  dkl    — single-particle dpkl (deterministic network baseline).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import gp, kernels, net
from .errors import ConfigError, EmptyUnlabeledSet, InsufficientData
from .linalg import solve_chol
from .threads import single_threaded_blas

MODES = ("dpkl", "ssdpkl", "dkl")
KERNEL_MODES = ("exact", "rff")

_H_FLOOR = 1e-12


@dataclass
class TrainConfig:
    """All training hyperparameters; defaults follow the reference protocol."""

    m: int = 50
    q: int = 100
    learning_rate: float = 1e-3
    noise_var: float = 0.1
    ssdpkl_alpha: float = 1.0
    max_epochs: int = 100
    val_fraction: float = 0.1
    early_stop_check_every: int = 10
    seed: int = 0
    mode: str = "dpkl"
    kernel_mode: str = "rff"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # latent map
    hidden_dims: tuple[int, ...] = (100, 50, 50)
    latent_dim: int = 2
    activation: str = "relu"
    # latent kernel
    amplitude: float = 0.5
    bandwidth: float = 1.0
    # numerics and plumbing
    base_jitter: float = 1e-8
    unlabeled_cap: int = 50000
    batch_size: int = 16  # classification only; regression is full-batch
    classifier_l2: float = 0.0
    # particle-kernel knobs: fixed bandwidth overrides the median heuristic;
    # "identity" weighting is a test hook that decouples the particles
    kappa_bandwidth: float | None = None
    kappa_weighting: str = "rbf"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.kernel_mode not in KERNEL_MODES:
            raise ConfigError(f"kernel_mode must be one of {KERNEL_MODES}")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.mode == "dkl" and self.m != 1:
            raise ConfigError("dkl mode forces m = 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in (0, 1)")
        if self.q < 1:
            raise ConfigError("q must be >= 1")
        if self.noise_var < 0:
            raise ConfigError("noise_var must be >= 0")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")
        if self.early_stop_check_every < 1:
            raise ConfigError("early_stop_check_every must be >= 1")
        if self.kappa_weighting not in ("rbf", "identity"):
            raise ConfigError("kappa_weighting must be 'rbf' or 'identity'")

    def kernel_spec(self) -> kernels.LatentKernelSpec:
        return kernels.LatentKernelSpec(self.amplitude, self.bandwidth)

    def architecture(self, input_dim: int) -> net.MlpArchitecture:
        return net.MlpArchitecture(
            input_dim, tuple(self.hidden_dims), self.latent_dim, self.activation
        )


@dataclass
class TrainData:
    """Labeled inputs/targets, plus an optional unlabeled pool for ssdpkl."""

    X: np.ndarray
    y: np.ndarray
    X_unlabeled: np.ndarray | None = None


def derive_seeds(seed: int) -> dict[str, int]:
    """Stable per-purpose child seeds from one master seed."""
    children = np.random.SeedSequence(seed).spawn(5)
    names = ("init", "val_split", "rff", "unlabeled", "batches")
    return {k: int(c.generate_state(1)[0]) for k, c in zip(names, children)}


# ---------------------------------------------------------------------------
# particle kernel
# ---------------------------------------------------------------------------


def _pairwise_sq_dists(flat: np.ndarray) -> np.ndarray:
    sq = np.sum(flat * flat, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (flat @ flat.T)
    return np.maximum(d2, 0.0)


def median_heuristic(ensemble: net.ParticleEnsemble) -> float:
    """Bandwidth med^2 / log(m+1) from median pairwise particle distance.

    Returns 1 for a single particle, and floors the bandwidth at 1e-12 when
    all particles coincide (kappa is then 1 among them regardless).
    """
    if ensemble.m == 1:
        return 1.0
    flat = ensemble.flat()
    d2 = _pairwise_sq_dists(flat)
    iu = np.triu_indices(ensemble.m, k=1)
    med = float(np.median(np.sqrt(d2[iu])))
    return max(med**2 / math.log(ensemble.m + 1), _H_FLOOR)


def kappa(h: float, w: np.ndarray, w2: np.ndarray) -> float:
    """RBF kernel between flattened parameter vectors: exp(-|w-w'|^2 / h)."""
    w = np.asarray(w, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    if w.shape != w2.shape:
        raise ValueError(f"parameter vectors differ in shape: {w.shape} vs {w2.shape}")
    return float(np.exp(-np.sum((w - w2) ** 2) / h))


def _kappa_matrix(flat: np.ndarray, h: float) -> np.ndarray:
    return np.exp(-_pairwise_sq_dists(flat) / h)


# ---------------------------------------------------------------------------
# objective and per-particle gradients
# ---------------------------------------------------------------------------


@dataclass
class _ObjectiveResult:
    objective: float
    nll: float
    regularizer: float
    grads: list[np.ndarray]
    jitter: float


def _rff_basis_for(config: TrainConfig, seed: int | None = None) -> kernels.RffBasis:
    if seed is None:
        seed = derive_seeds(config.seed)["rff"]
    return kernels.sample_rff_basis(config.kernel_spec(), config.latent_dim, config.q, seed)


def _objective_core(
    ensemble: net.ParticleEnsemble,
    data: TrainData,
    config: TrainConfig,
    basis: kernels.RffBasis | None,
    want_grads: bool,
) -> _ObjectiveResult:
    spec = config.kernel_spec()
    ssdpkl = config.mode == "ssdpkl"
    X_lab = np.asarray(data.X, dtype=np.float64)
    y = np.asarray(data.y, dtype=np.float64).reshape(-1)
    n_l = X_lab.shape[0]

    if ssdpkl:
        if data.X_unlabeled is None or len(data.X_unlabeled) == 0:
            raise EmptyUnlabeledSet("ssdpkl mode needs a non-empty unlabeled pool")
        X_all = np.vstack([X_lab, data.X_unlabeled])
        n_u = X_all.shape[0] - n_l
    else:
        X_all, n_u = X_lab, 0

    Z_all = net.ensemble_embeddings(ensemble, X_all)
    rff = config.kernel_mode == "rff"

    if rff:
        if basis is None:
            basis = _rff_basis_for(config)
        R_all = kernels.rff_feature_matrix(basis, Z_all, spec)
        R_L, R_U = R_all[:n_l], R_all[n_l:]
        state = gp.gp_state_rff(R_L, y, config.noise_var, config.base_jitter)
    else:
        K_full = kernels.empirical_cross_block(spec, Z_all, Z_all)
        K_full = 0.5 * (K_full + K_full.T)
        K_LL = K_full[:n_l, :n_l]
        state = gp.gp_state_exact(K_LL, y, config.noise_var, config.base_jitter)

    nll_value = gp.nll(state)

    reg_value = 0.0
    B = None
    if ssdpkl:
        if rff:
            K_LU = R_L @ R_U.T
            k_ss = np.sum(R_U * R_U, axis=1)
        else:
            K_LU = K_full[:n_l, n_l:]
            k_ss = np.diag(K_full[n_l:, n_l:]).copy()
        B = solve_chol(state.chol, K_LU)  # columns are A^{-1} k_*(u)
        reg_value = float(np.sum(k_ss) - np.sum(K_LU * B))
        c_nll = 1.0 / n_l
        w_reg = config.ssdpkl_alpha / n_u
        objective = c_nll * nll_value + w_reg * reg_value
    else:
        c_nll, w_reg = 1.0, 0.0
        objective = nll_value

    if not want_grads:
        return _ObjectiveResult(objective, nll_value, reg_value, [], state.chol.jitter_used)

    S = gp.nll_grad_kernel(state)
    if rff:
        if ssdpkl:
            T_L = 2.0 * (c_nll * S + w_reg * (B @ B.T)) @ R_L - 2.0 * w_reg * (B @ R_U)
            T_U = 2.0 * w_reg * (R_U - B.T @ R_L)
            T_all = np.vstack([T_L, T_U])
        else:
            T_all = 2.0 * S @ R_L
        G_list = kernels.rff_embedding_cotangents(basis, Z_all, spec, T_all)
    else:
        n_tot = n_l + n_u
        C = np.zeros((n_tot, n_tot))
        C[:n_l, :n_l] = c_nll * S
        if ssdpkl:
            C[:n_l, :n_l] += w_reg * (B @ B.T)
            C[:n_l, n_l:] = -2.0 * w_reg * B
            C[n_l:, n_l:] = w_reg * np.eye(n_u)
        G_list = kernels.kernel_embedding_cotangents(spec, Z_all, C)

    grads = [
        net.backward_params(p, X_all, G)
        for p, G in zip(ensemble.particles, G_list)
    ]
    return _ObjectiveResult(objective, nll_value, reg_value, grads, state.chol.jitter_used)


def per_particle_loss_grads(
    ensemble: net.ParticleEnsemble,
    data: TrainData,
    config: TrainConfig,
    basis: kernels.RffBasis | None = None,
) -> list[np.ndarray]:
    """Gradient of the scalar training objective with respect to each particle.

    The objective is the GP nll (dpkl/dkl) or its semi-supervised extension
    (ssdpkl). The chain runs objective -> kernel representation -> per-particle
    embedding cotangents -> parameter vectors.
    """
    return _objective_core(ensemble, data, config, basis, want_grads=True).grads


def objective_value(
    ensemble: net.ParticleEnsemble,
    data: TrainData,
    config: TrainConfig,
    basis: kernels.RffBasis | None = None,
) -> float:
    """The scalar objective the trainer descends, at the current particles."""
    return _objective_core(ensemble, data, config, basis, want_grads=False).objective


# ---------------------------------------------------------------------------
# update rule
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """Per-particle Adam moments; only raw gradients are kernel-mixed."""

    m1: np.ndarray
    m2: np.ndarray
    t: int = 0
    last_bandwidth: float | None = None

    @staticmethod
    def zeros(m: int, p: int) -> "AdamState":
        return AdamState(m1=np.zeros((m, p)), m2=np.zeros((m, p)))


def functional_gradient_step(
    ensemble: net.ParticleEnsemble,
    grads: list[np.ndarray],
    opt: AdamState,
    config: TrainConfig,
) -> net.ParticleEnsemble:
    """Kernel-mix the particle gradients and take one Adam step per particle.

    phi(w_i) = sum_l kappa(w_i, w_l) grads[l], with kappa's bandwidth from the
    median heuristic recomputed this iteration (or the configured override).
    Mutates and returns the ensemble.
    """
    flat = ensemble.flat()
    G = np.stack(grads)
    if G.shape != flat.shape:
        raise ValueError(f"gradient stack {G.shape} does not match particles {flat.shape}")
    if config.kappa_weighting == "identity":
        phi = G
        opt.last_bandwidth = None
    else:
        h = config.kappa_bandwidth if config.kappa_bandwidth is not None else median_heuristic(ensemble)
        phi = _kappa_matrix(flat, h) @ G
        opt.last_bandwidth = h

    opt.t += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    opt.m1 = b1 * opt.m1 + (1.0 - b1) * phi
    opt.m2 = b2 * opt.m2 + (1.0 - b2) * phi * phi
    m_hat = opt.m1 / (1.0 - b1**opt.t)
    v_hat = opt.m2 / (1.0 - b2**opt.t)
    flat = flat - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    ensemble.particles = [net.unflatten_params(ensemble.arch, row) for row in flat]
    return ensemble


# ---------------------------------------------------------------------------
# prediction (always the exact kernel route)
# ---------------------------------------------------------------------------


def predict_regression(
    ensemble: net.ParticleEnsemble,
    spec: kernels.LatentKernelSpec,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_query: np.ndarray,
    noise_var: float,
    base_jitter: float = 1e-8,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and latent variances at query points (normalized units)."""
    Z_tr = net.ensemble_embeddings(ensemble, X_train)
    K = kernels.empirical_kernel_exact(spec, Z_tr)
    state = gp.gp_state_exact(K, y_train, noise_var, base_jitter)
    Z_q = net.ensemble_embeddings(ensemble, X_query)
    K_star, k_ss = kernels.cross_kernel_batch(spec, Z_tr, Z_q)
    return gp.posterior_batch(state, K_star, k_ss)


def latent_mean_embeddings(ensemble: net.ParticleEnsemble, X: np.ndarray) -> np.ndarray:
    """Mean over particles of the latent images of each point, (n, d)."""
    Z = net.ensemble_embeddings(ensemble, X)
    return np.mean(np.stack(Z), axis=0)


def predictive_nll(
    means: np.ndarray, variances: np.ndarray, y: np.ndarray, noise_var: float
) -> float:
    """Mean Gaussian negative log density of targets under the posterior."""
    v = variances + noise_var
    return float(np.mean(0.5 * (np.log(2.0 * np.pi * v) + (y - means) ** 2 / v)))


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class EpochRecord:
    epoch: int
    train_nll: float
    objective: float
    val_metric: float | None
    h_kappa: float | None
    jitter: float
    seconds: float


@dataclass
class RunReport:
    """Everything a run produced besides the ensemble itself."""

    task: str
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_metric: float = math.nan
    final_train_nll: float = math.nan
    final_objective: float = math.nan
    total_seconds: float = 0.0
    final_metrics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "epochs": [vars(e) for e in self.epochs],
            "best_epoch": self.best_epoch,
            "best_val_metric": self.best_val_metric,
            "final_train_nll": self.final_train_nll,
            "final_objective": self.final_objective,
            "total_seconds": self.total_seconds,
            "final_metrics": self.final_metrics,
        }


def _validation_split(n: int, val_fraction: float, seed: int):
    order = np.random.default_rng(seed).permutation(n)
    n_val = math.ceil(val_fraction * n)
    n_train = n - n_val
    if n_train < 2:
        raise InsufficientData(
            f"{n} labeled points leave {n_train} for training after the validation split"
        )
    return order[:n_train], order[n_train:]


def _subsample_unlabeled(X_u, cap, seed, epoch):
    if X_u is None or X_u.shape[0] <= cap:
        return X_u
    rng = np.random.default_rng([seed, epoch])
    idx = rng.choice(X_u.shape[0], size=cap, replace=False)
    return X_u[idx]


def fit(
    data: TrainData,
    config: TrainConfig,
    trajectory_hook=None,
) -> tuple[net.ParticleEnsemble, RunReport]:
    """Run the full training loop and return the best-validation snapshot.

    The validation set is the last ceil(val_fraction * n) points of a seeded
    shuffle of the labeled data. Validation NLL is checked at epoch 0, every
    early_stop_check_every epochs, and at the last epoch; the best snapshot is
    returned, never one worse than epoch 0. Deterministic given config.seed.
    """
    config.validate()
    if config.mode == "ssdpkl" and (
        data.X_unlabeled is None or len(data.X_unlabeled) == 0
    ):
        raise EmptyUnlabeledSet("ssdpkl mode needs a non-empty unlabeled pool")
    with single_threaded_blas():
        return _fit_loop(data, config, trajectory_hook)


def _fit_loop(data, config, trajectory_hook):
    t_start = time.perf_counter()
    X = np.asarray(data.X, dtype=np.float64)
    y = np.asarray(data.y, dtype=np.float64).reshape(-1)
    seeds = derive_seeds(config.seed)
    tr_idx, val_idx = _validation_split(X.shape[0], config.val_fraction, seeds["val_split"])
    X_tr, y_tr = X[tr_idx], y[tr_idx]
    X_val, y_val = X[val_idx], y[val_idx]

    spec = config.kernel_spec()
    arch = config.architecture(X.shape[1])
    ensemble = net.init_ensemble(arch, config.m, seeds["init"])
    basis = _rff_basis_for(config, seeds["rff"]) if config.kernel_mode == "rff" else None
    opt = AdamState.zeros(config.m, arch.num_params)

    def val_metric(ens) -> float:
        means, variances = predict_regression(
            ens, spec, X_tr, y_tr, X_val, config.noise_var, config.base_jitter
        )
        return predictive_nll(means, variances, y_val, config.noise_var)

    report = RunReport(task="regression")
    best_metric = val_metric(ensemble)
    best_snapshot = ensemble.copy()
    best_epoch = 0
    if trajectory_hook is not None:
        trajectory_hook(0, ensemble)

    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        X_u = _subsample_unlabeled(
            data.X_unlabeled, config.unlabeled_cap, seeds["unlabeled"], epoch
        )
        epoch_data = TrainData(X_tr, y_tr, X_u)
        result = _objective_core(ensemble, epoch_data, config, basis, want_grads=True)
        functional_gradient_step(ensemble, result.grads, opt, config)
        checked = epoch % config.early_stop_check_every == 0 or epoch == config.max_epochs
        metric = val_metric(ensemble) if checked else None
        if metric is not None and metric < best_metric:
            best_metric = metric
            best_snapshot = ensemble.copy()
            best_epoch = epoch
        report.epochs.append(
            EpochRecord(
                epoch=epoch,
                train_nll=result.nll,
                objective=result.objective,
                val_metric=metric,
                h_kappa=opt.last_bandwidth,
                jitter=result.jitter,
                seconds=time.perf_counter() - t0,
            )
        )
        if trajectory_hook is not None:
            trajectory_hook(epoch, ensemble)

    final = _objective_core(
        ensemble,
        TrainData(X_tr, y_tr, data.X_unlabeled),
        config,
        basis,
        want_grads=False,
    )
    report.final_train_nll = final.nll
    report.final_objective = final.objective
    report.best_epoch = best_epoch
    report.best_val_metric = best_metric
    report.total_seconds = time.perf_counter() - t_start
    return best_snapshot, report
