"""Batch command-line surface: train, predict, benchmark, report.

Outputs are plot-ready CSVs and JSON, never figures. Every JSON artifact
embeds the fully-resolved config and a build version string; every CSV gets a
.meta.json sidecar with the same so the tables themselves stay tidy and
RFC-4180 clean. Exit codes: 0 success, 1 user/config/data error, 2 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from . import __version__, classify, trainer
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import Dataset, SplitSpec, load_csv, normalize, split
from .errors import (
    CheckpointError,
    ConfigError,
    DpklError,
    InternalConsistencyError,
)
from .threads import single_threaded_blas
from .trainer import TrainConfig, TrainData

# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------


def build_version() -> str:
    base = __version__
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{base}+g{out.stdout.strip()}"
    except Exception:
        pass
    return base


def _fmt_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def write_csv(path, header, rows) -> None:
    """Comma-delimited UTF-8 with a header row; floats use shortest repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt_cell(v) for v in row])


def write_meta(csv_path: Path, config: dict, extra: dict | None = None) -> None:
    """Sidecar with the resolved config and version, so CSVs stay tidy."""
    meta = {"version": build_version(), "config": config}
    if extra:
        meta.update(extra)
    meta_path = csv_path.with_suffix(".meta.json")
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2)


def _error_record(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


# ---------------------------------------------------------------------------
# config resolution: flags > config file > TrainConfig defaults
# ---------------------------------------------------------------------------

_INT_KEYS = {
    "m", "q", "max_epochs", "early_stop_check_every", "seed", "latent_dim",
    "batch_size", "unlabeled_cap", "n_labeled", "n_unlabeled", "n_test",
    "trials", "workers",
}
_FLOAT_KEYS = {
    "learning_rate", "noise_var", "ssdpkl_alpha", "val_fraction", "adam_beta1",
    "adam_beta2", "adam_eps", "amplitude", "bandwidth", "base_jitter",
    "classifier_l2", "kappa_bandwidth",
}
_BOOL_KEYS = {"no_header", "no_normalize_features", "skip_bad_rows"}
_TUPLE_KEYS = {"hidden_dims"}


def _convert(key: str, raw: str):
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _BOOL_KEYS:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key}: expected a boolean, got {raw!r}")
    if key in _TUPLE_KEYS:
        return tuple(int(x) for x in raw.split(",") if x.strip())
    return raw


def read_config_file(path) -> dict:
    """Flat key=value file; '#' starts a comment; keys match flag names."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = line.split("=", 1)
            key = key.strip().replace("-", "_")
            values[key] = _convert(key, raw.strip())
    return values


def _resolve(args, key, default=None):
    """Flag value if given, else config-file value, else the default."""
    v = getattr(args, key, None)
    if v is not None:
        return v
    if key in args._file_config:
        return args._file_config[key]
    return default


_TRAIN_CONFIG_KEYS = [f.name for f in TrainConfig.__dataclass_fields__.values()]


def _train_config_kwargs(args) -> dict:
    kwargs = {}
    for key in _TRAIN_CONFIG_KEYS:
        v = _resolve(args, key)
        if v is not None:
            kwargs[key] = v
    if isinstance(kwargs.get("hidden_dims"), str):
        kwargs["hidden_dims"] = _convert("hidden_dims", kwargs["hidden_dims"])
    return kwargs


def resolve_train_config(args) -> TrainConfig:
    kwargs = _train_config_kwargs(args)
    # dkl means a single deterministic network unless m was forced explicitly
    if kwargs.get("mode") == "dkl" and "m" not in kwargs:
        kwargs["m"] = 1
    cfg = TrainConfig(**kwargs)
    cfg.validate()
    return cfg


def _spearman(x: np.ndarray, y: np.ndarray):
    """Spearman rank correlation, None when undefined (constant input)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 2 or np.all(x == x[0]) or np.all(y == y[0]):
        return None
    rho = spearmanr(x, y).statistic
    return None if rho is None or math.isnan(rho) else float(rho)


# ---------------------------------------------------------------------------
# evaluation shared by train / benchmark
# ---------------------------------------------------------------------------


def _evaluate_regression(ensemble, cfg: TrainConfig, labeled, test, stats):
    """Test metrics in original target units, plus per-point tables."""
    means_n, vars_n = trainer.predict_regression(
        ensemble, cfg.kernel_spec(), labeled.X, labeled.y, test.X, cfg.noise_var,
        cfg.base_jitter,
    )
    means = stats.invert_y(means_n)
    latent_var = stats.invert_variance(vars_n)
    pred_var = stats.invert_variance(vars_n + cfg.noise_var)
    y_true = stats.invert_y(test.y)
    sq_err = (means - y_true) ** 2
    rmse = float(np.sqrt(np.mean(sq_err)))
    test_nll = float(
        np.mean(0.5 * (np.log(2.0 * np.pi * pred_var) + sq_err / pred_var))
    )
    return {
        "n_test": int(test.n),
        "rmse": rmse,
        "test_nll": test_nll,
        "spearman_variance_error": _spearman(pred_var, sq_err),
        "per_point": {
            "variance": pred_var.tolist(),
            "latent_variance": latent_var.tolist(),
            "squared_error": sq_err.tolist(),
        },
    }


def _evaluate_classification(ensemble, head, test):
    probs = classify.predict_probs(ensemble, head, test.X)
    labels = test.y.astype(np.int64)
    pred = probs.argmax(axis=1)
    errors = (pred != labels).astype(float)
    entropy = classify.prediction_entropy(probs)
    ce = classify.cross_entropy(probs, classify.one_hot(labels, head.C))
    return {
        "n_test": int(test.n),
        "accuracy": float(np.mean(pred == labels)),
        "test_cross_entropy": float(ce),
        "spearman_entropy_error": _spearman(entropy, errors),
        "per_point": {"entropy": entropy.tolist(), "error": errors.tolist()},
    }


def _split_dataset(ds: Dataset, args, seed: int):
    n_labeled = _resolve(args, "n_labeled")
    if n_labeled is None:
        raise ConfigError("--n-labeled is required")
    n_unlabeled = _resolve(args, "n_unlabeled", 0)
    n_test = _resolve(args, "n_test")
    if n_test is None:
        n_test = ds.n - n_labeled - n_unlabeled
    if n_test < 0:
        raise ConfigError("labeled + unlabeled sizes exceed the dataset")
    return split(ds, SplitSpec(n_labeled, n_unlabeled, n_test, seed)), n_test


def _run_training(ds: Dataset, args, cfg: TrainConfig, task: str, seed: int):
    """Split, normalize, fit, evaluate. Returns everything train/benchmark need."""
    parts, n_test = _split_dataset(ds, args, seed)
    labeled, unlabeled, test = parts["labeled"], parts["unlabeled"], parts["test"]
    normalize_features = not bool(_resolve(args, "no_normalize_features", False))
    labeled_n, (unlabeled_n, test_n), stats = normalize(
        labeled,
        [unlabeled, test],
        normalize_labels=(task == "regression"),
        normalize_features=normalize_features,
    )
    head = None
    if task == "regression":
        pool = unlabeled_n.X if cfg.mode == "ssdpkl" else None
        ensemble, report = trainer.fit(TrainData(labeled_n.X, labeled_n.y, pool), cfg)
        metrics = (
            _evaluate_regression(ensemble, cfg, labeled_n, test_n, stats)
            if n_test > 0
            else {}
        )
    else:
        ensemble, head, report = classify.fit_classifier(
            TrainData(labeled_n.X, labeled_n.y), cfg
        )
        metrics = _evaluate_classification(ensemble, head, test_n) if n_test > 0 else {}
    report.final_metrics = metrics
    latent = trainer.latent_mean_embeddings(ensemble, test_n.X) if n_test > 0 else np.zeros((0, cfg.latent_dim))
    return ensemble, head, report, metrics, labeled_n, test_n, stats, latent


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = resolve_train_config(args)
    task = _resolve(args, "task", "regression")
    if task not in ("regression", "classification"):
        raise ConfigError(f"unknown task {task!r}")
    data_path = _resolve(args, "data")
    target = _resolve(args, "target")
    if data_path is None or target is None:
        raise ConfigError("--data and --target are required")
    out_dir = Path(_resolve(args, "out", "run"))
    out_dir.mkdir(parents=True, exist_ok=True)

    ds = load_csv(
        data_path,
        target,
        delimiter=_resolve(args, "delimiter", ","),
        has_header=not bool(_resolve(args, "no_header", False)),
        skip_bad_rows=bool(_resolve(args, "skip_bad_rows", False)),
    )
    if cfg.mode == "ssdpkl" and _resolve(args, "n_unlabeled", 0) == 0:
        raise ConfigError("ssdpkl mode needs --n-unlabeled > 0")

    ensemble, head, report, metrics, labeled_n, test_n, stats, latent = _run_training(
        ds, args, cfg, task, cfg.seed
    )

    resolved = dict(asdict(cfg), task=task, data=str(data_path), target=str(target))
    version = build_version()
    ckpt = Checkpoint(
        task=task,
        target_column=target,
        ensemble=ensemble,
        head=head,
        kernel_spec=cfg.kernel_spec(),
        rff_basis=trainer._rff_basis_for(cfg) if cfg.kernel_mode == "rff" else None,
        noise_var=cfg.noise_var,
        stats=stats,
        X_train=labeled_n.X,
        y_train=labeled_n.y,
        config=resolved,
        version=version,
    )
    ckpt_path = out_dir / "checkpoint.json"
    save_checkpoint(ckpt_path, ckpt)

    report_doc = {
        "version": version,
        "config": resolved,
        "run": report.to_dict(),
        "test": metrics,
        "latent_mean_embeddings": latent.tolist(),
    }
    report_path = out_dir / "report.json"
    with open(report_path, "w") as fh:
        json.dump(report_doc, fh, indent=2)

    print(
        json.dumps(
            {
                "checkpoint": str(ckpt_path),
                "report": str(report_path),
                "best_epoch": report.best_epoch,
                **{k: v for k, v in metrics.items() if not isinstance(v, dict)},
            }
        )
    )
    return 0


def cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    has_header = not bool(args.no_header)
    target = args.target if args.target is not None else ckpt.target_column
    D = ckpt.ensemble.arch.input_dim

    # the query file may or may not still carry the target column
    try:
        X = load_csv(args.data, target, delimiter=args.delimiter, has_header=has_header).X
    except DpklError:
        X = _load_featureonly_csv(args.data, args.delimiter, has_header)
    if X.shape[1] != D:
        raise CheckpointError(
            f"query has {X.shape[1]} feature columns, checkpoint expects {D}"
        )

    X_n = ckpt.stats.apply_x(X)
    out_path = Path(args.out) if args.out else Path("predictions.csv")
    if ckpt.task == "regression":
        means_n, vars_n = trainer.predict_regression(
            ckpt.ensemble, ckpt.kernel_spec, ckpt.X_train, ckpt.y_train, X_n,
            ckpt.noise_var,
        )
        means = ckpt.stats.invert_y(means_n)
        variances = ckpt.stats.invert_variance(vars_n)
        write_csv(out_path, ["mean", "variance"], zip(means, variances))
    else:
        probs = classify.predict_probs(ckpt.ensemble, ckpt.head, X_n)
        entropy = classify.prediction_entropy(probs)
        header = ["pred_class", "entropy"] + [f"prob_{c}" for c in range(ckpt.head.C)]
        rows = [
            [int(p.argmax()), h, *p]
            for p, h in zip(probs, entropy)
        ]
        write_csv(out_path, header, rows)
    write_meta(out_path, ckpt.config)
    print(json.dumps({"predictions": str(out_path), "n": int(X.shape[0])}))
    return 0


def _load_featureonly_csv(path, delimiter, has_header) -> np.ndarray:
    """Query files without the training target column: every column is a feature."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r]
    body = rows[1:] if has_header else rows
    try:
        return np.asarray([[float(c) for c in r] for r in body])
    except ValueError as exc:
        raise CheckpointError(f"query file is not numeric: {exc}")


_BENCH_HEADER = ["dataset", "mode", "n", "trial", "seed", "rmse", "nll"]


def _existing_bench_keys(path: Path) -> set[tuple]:
    if not path.exists():
        return set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return {
            (r["mode"], int(r["n"]), int(r["trial"]), int(r["seed"])) for r in reader
        }


def cmd_benchmark(args) -> int:
    data_path = _resolve(args, "data")
    target = _resolve(args, "target")
    if data_path is None or target is None:
        raise ConfigError("--data and --target are required")
    sizes = [int(s) for s in str(_resolve(args, "sizes", "50,100")).split(",") if s.strip()]
    modes = [s.strip() for s in str(_resolve(args, "modes", "dpkl,dkl")).split(",") if s.strip()]
    trials = int(_resolve(args, "trials", 10))
    base_seed = int(_resolve(args, "seed", 0))
    n_unlabeled = int(_resolve(args, "n_unlabeled", 0))
    workers = int(_resolve(args, "workers", 1))
    out_dir = Path(_resolve(args, "out", "benchmark"))
    out_dir.mkdir(parents=True, exist_ok=True)

    ds = load_csv(
        data_path,
        target,
        delimiter=_resolve(args, "delimiter", ","),
        has_header=not bool(_resolve(args, "no_header", False)),
    )
    dataset_name = Path(str(data_path)).stem
    n_test = _resolve(args, "n_test")
    if n_test is None:
        n_test = ds.n - max(sizes) - n_unlabeled
        if n_test < 1:
            raise ConfigError("dataset too small for the requested sizes; set --n-test")

    def run_cell(mode: str, n: int, trial: int):
        seed = base_seed + trial
        kwargs = _train_config_kwargs(args)
        kwargs.update(mode=mode, seed=seed)
        if mode == "dkl":
            kwargs["m"] = 1
        cfg = TrainConfig(**kwargs)
        cfg.validate()

        class _CellArgs:
            pass

        cell = _CellArgs()
        cell._file_config = {}
        cell.n_labeled = n
        cell.n_unlabeled = n_unlabeled if mode == "ssdpkl" else 0
        cell.n_test = n_test
        cell.no_normalize_features = bool(_resolve(args, "no_normalize_features", False))
        _, _, _, metrics, *_ = _run_training(ds, cell, cfg, "regression", seed)
        return [dataset_name, mode, n, trial, seed, metrics["rmse"], metrics["test_nll"]]

    cells = [(mode, n, trial) for mode in modes for n in sizes for trial in range(trials)]
    results_path = out_dir / "results.csv"
    existing = _existing_bench_keys(results_path)
    todo = [c for c in cells if (c[0], c[1], c[2], base_seed + c[2]) not in existing]

    rows, failures = [], []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_cell, *c): c for c in todo}
            for fut, cell in futures.items():
                try:
                    rows.append(fut.result())
                except Exception as exc:
                    failures.append({"cell": list(cell), "error": type(exc).__name__, "message": str(exc)})
    else:
        for cell in todo:
            try:
                rows.append(run_cell(*cell))
            except Exception as exc:
                failures.append({"cell": list(cell), "error": type(exc).__name__, "message": str(exc)})

    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    new_file = not results_path.exists()
    with open(results_path, "a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if new_file:
            w.writerow(_BENCH_HEADER)
        for row in rows:
            w.writerow([_fmt_cell(v) for v in row])

    # summary is rebuilt from the full results file: mean and 1-std error bars
    with open(results_path, newline="") as fh:
        all_rows = list(csv.DictReader(fh))
    summary = []
    for mode in sorted({r["mode"] for r in all_rows}):
        for n in sorted({int(r["n"]) for r in all_rows if r["mode"] == mode}):
            sel = [r for r in all_rows if r["mode"] == mode and int(r["n"]) == n]
            rmses = np.asarray([float(r["rmse"]) for r in sel])
            nlls = np.asarray([float(r["nll"]) for r in sel])
            summary.append(
                [mode, n, len(sel), rmses.mean(), rmses.std(), nlls.mean(), nlls.std()]
            )
    summary_path = out_dir / "summary.csv"
    write_csv(
        summary_path,
        ["mode", "n", "trials", "rmse_mean", "rmse_std", "nll_mean", "nll_std"],
        summary,
    )

    resolved = {
        "data": str(data_path), "target": str(target), "sizes": sizes, "modes": modes,
        "trials": trials, "seed": base_seed, "n_test": int(n_test),
        "n_unlabeled": n_unlabeled, "workers": workers,
    }
    write_meta(results_path, resolved, {"failures": failures})
    write_meta(summary_path, resolved)
    for failure in failures:
        _error_record(failure["error"], f"cell {failure['cell']}: {failure['message']}")
    if todo and len(failures) == len(todo):
        _error_record("BenchmarkFailed", "every trial failed")
        return 1
    print(json.dumps({"results": str(results_path), "summary": str(summary_path),
                      "new_rows": len(rows), "failures": len(failures)}))
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    report_path = run_dir / "report.json"
    if not report_path.exists():
        raise CheckpointError(f"{report_path} not found; run `dpkl train` first")
    with open(report_path) as fh:
        doc = json.load(fh)
    out_dir = Path(args.out) if args.out else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    config = doc.get("config", {})
    test = doc.get("test", {})
    per_point = test.get("per_point", {})
    outputs = {}

    latent = np.asarray(doc.get("latent_mean_embeddings", []))
    if latent.size:
        latent_path = out_dir / "latent.csv"
        write_csv(latent_path, [f"z{i}" for i in range(latent.shape[1])], latent)
        write_meta(latent_path, config)
        outputs["latent"] = str(latent_path)

    if "variance" in per_point:
        var = np.asarray(per_point["variance"])
        sq = np.asarray(per_point["squared_error"])
        order = np.argsort(var, kind="stable")
        bins = np.array_split(order, min(10, len(order)))
        rows = [
            [i + 1, len(b), float(var[b].mean()), float(sq[b].mean())]
            for i, b in enumerate(bins)
            if len(b)
        ]
        cal_path = out_dir / "calibration.csv"
        write_csv(cal_path, ["decile", "count", "mean_variance", "mean_squared_error"], rows)
        write_meta(cal_path, config, {"spearman_variance_error": test.get("spearman_variance_error")})
        outputs["calibration"] = str(cal_path)
        outputs["spearman_variance_error"] = test.get("spearman_variance_error")

    if "entropy" in per_point:
        ent = per_point["entropy"]
        err = per_point["error"]
        ent_path = out_dir / "entropy.csv"
        write_csv(ent_path, ["entropy", "error"], zip(ent, err))
        write_meta(ent_path, config, {"spearman_entropy_error": test.get("spearman_entropy_error")})
        outputs["entropy"] = str(ent_path)
        outputs["spearman_entropy_error"] = test.get("spearman_entropy_error")

    if not outputs:
        raise CheckpointError("run directory has no test artifacts to report on")
    print(json.dumps(outputs))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", choices=["regression", "classification"])
    p.add_argument("--data")
    p.add_argument("--target")
    p.add_argument("--delimiter")
    p.add_argument("--no-header", action="store_const", const=True, dest="no_header")
    p.add_argument("--skip-bad-rows", action="store_const", const=True, dest="skip_bad_rows")
    p.add_argument("--n-labeled", type=int, dest="n_labeled")
    p.add_argument("--n-unlabeled", type=int, dest="n_unlabeled")
    p.add_argument("--n-test", type=int, dest="n_test")
    p.add_argument("--no-normalize-features", action="store_const", const=True,
                   dest="no_normalize_features")
    p.add_argument("--mode", choices=["dpkl", "ssdpkl", "dkl"])
    p.add_argument("--kernel-mode", choices=["exact", "rff"], dest="kernel_mode")
    p.add_argument("--m", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--learning-rate", "--lr", type=float, dest="learning_rate")
    p.add_argument("--noise-var", type=float, dest="noise_var")
    p.add_argument("--alpha", type=float, dest="ssdpkl_alpha")
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.add_argument("--val-fraction", type=float, dest="val_fraction")
    p.add_argument("--check-every", type=int, dest="early_stop_check_every")
    p.add_argument("--seed", type=int)
    p.add_argument("--hidden-dims", dest="hidden_dims")
    p.add_argument("--latent-dim", type=int, dest="latent_dim")
    p.add_argument("--activation", choices=["relu", "tanh"])
    p.add_argument("--amplitude", type=float)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--unlabeled-cap", type=int, dest="unlabeled_cap")
    p.add_argument("--classifier-l2", type=float, dest="classifier_l2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpkl",
        description="GP regression and softmax classification over latent "
        "distributions learned by particle ensembles.",
    )
    parser.add_argument("--version", action="version", version=build_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model and write checkpoint + report")
    _add_train_flags(p_train)
    p_train.add_argument("--config", help="key=value config file (flags override)")
    p_train.add_argument("--out", "-o", help="output directory (default: run)")
    p_train.set_defaults(func=cmd_train)

    p_pred = sub.add_parser("predict", help="posterior predictions from a checkpoint")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--data", required=True)
    p_pred.add_argument("--target", help="column to drop from the query file")
    p_pred.add_argument("--delimiter", default=",")
    p_pred.add_argument("--no-header", action="store_const", const=True, dest="no_header")
    p_pred.add_argument("--out", "-o", help="output CSV path")
    p_pred.set_defaults(func=cmd_predict, _file_config={})

    p_bench = sub.add_parser("benchmark", help="trials x sizes x modes RMSE/NLL grid")
    _add_train_flags(p_bench)
    p_bench.add_argument("--config", help="key=value config file (flags override)")
    p_bench.add_argument("--sizes", help="comma list of labeled-set sizes (default 50,100)")
    p_bench.add_argument("--trials", type=int)
    p_bench.add_argument("--modes", help="comma list from dpkl,ssdpkl,dkl (default dpkl,dkl)")
    p_bench.add_argument("--workers", type=int, help="parallel trial workers (default 1)")
    p_bench.add_argument("--out", "-o", help="output directory (default: benchmark)")
    p_bench.set_defaults(func=cmd_benchmark)

    p_rep = sub.add_parser("report", help="calibration/latent/entropy tables from a run")
    p_rep.add_argument("--run-dir", required=True, dest="run_dir")
    p_rep.add_argument("--out", "-o", help="output directory (default: run dir)")
    p_rep.set_defaults(func=cmd_report, _file_config={})

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "_file_config"):
        args._file_config = read_config_file(args.config) if getattr(args, "config", None) else {}
    try:
        with single_threaded_blas():
            return args.func(args)
    except InternalConsistencyError as exc:
        _error_record(type(exc).__name__, str(exc))
        return 2
    except (DpklError, FileNotFoundError, ValueError) as exc:
        _error_record(type(exc).__name__, str(exc))
        return 1
    except Exception as exc:  # anything else is an internal failure
        _error_record(type(exc).__name__, str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
