"""Experiment driver: ``run`` one configuration, ``sweep`` one axis.

Config precedence is flags > environment (output dir only, via
HGINJECT_OUTPUT_DIR) > config file (JSON or TOML) > the DEFAULTS table
below. Every emitted CSV row carries the resolved config hash and package
version, and a fixed config plus fixed seeds reproduces the CSV byte for
byte. Exit codes: 0 success, 2 config error, 3 data error, 4 numeric
divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .attack import (
    ELITE_METHODS,
    AttackConfig,
    AttackResult,
    random_injection_baseline,
    run_attack,
)
from .datasets import Dataset, load_planetoid, make_splits, row_normalize
from .errors import ConfigError, DataError, DivergenceError, HginjectError
from .evaluation import evaluate_under_detection
from .generator import KERNELS, binarize_features
from .hgnn import TrainConfig, hidden_embeddings, normalized_adjacency, train_surrogate
from .hypergraph import Hypergraph, build_hor, build_knn, build_l1
from .plots import plot_loss_traces, plot_rates, plot_sweep

log = logging.getLogger("hginject")

OUTPUT_DIR_ENV = "HGINJECT_OUTPUT_DIR"

CSV_COLUMNS = [
    "dataset",
    "construction",
    "method",
    "eta",
    "kernel",
    "seed",
    "clean_rate",
    "attacked_rate",
    "pca_rate",
    "hbos_rate",
    "config_hash",
    "version",
]

# The single source of configuration defaults (documented in the README).
DEFAULTS: dict = {
    "dataset": "cora",
    "data_dir": None,  # resolves to data/<dataset>
    "content": None,  # explicit .content path, overrides data_dir
    "cites": None,  # explicit .cites path, overrides data_dir
    "construction": "knn",
    "k": 10,
    "order": 1,
    "gamma": 0.1,
    "row_normalize": False,
    "train_per_class": 20,
    "val_size": 500,
    "test_size": 1000,
    "hidden": 16,
    "surrogate_lr": 0.01,
    "epochs": 200,
    "weight_decay": 5e-4,
    "eta": 1.0,
    "kernel": "gaussian",
    "attack_lr": 0.01,
    "max_iters": 300,
    "patience": 30,
    "elite_method": "cycle_ratio",
    "seeds": [2024],
    "with_baseline": False,
    "with_ablations": False,
    "binarize": False,
    "output_dir": "results",
    "workers": 0,  # 0 = pick automatically for sweeps
}

CONSTRUCTIONS = ("knn", "hor", "l1")
SWEEP_AXES = ("eta", "kernel", "elite_method")
ABLATIONS = ("no_elite", "no_kde", "no_generator")


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_bytes()
    try:
        if p.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            return tomllib.loads(text.decode("utf-8"))
        return json.loads(text.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config file {p}: {exc}") from exc


def _parse_seeds(raw) -> list[int]:
    if isinstance(raw, str):
        parts = [s for chunk in raw.split(",") for s in chunk.split()]
        raw = parts
    try:
        seeds = [int(s) for s in raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seeds must be integers, got {raw!r}") from exc
    if not seeds:
        raise ConfigError("at least one seed is required")
    return seeds


def _validate(cfg: dict) -> dict:
    if cfg["construction"] not in CONSTRUCTIONS:
        raise ConfigError(
            f"construction must be one of {CONSTRUCTIONS}, got {cfg['construction']!r}"
        )
    if cfg["kernel"] not in KERNELS:
        raise ConfigError(f"kernel must be one of {KERNELS}, got {cfg['kernel']!r}")
    if cfg["elite_method"] not in ELITE_METHODS:
        raise ConfigError(
            f"elite_method must be one of {ELITE_METHODS}, got {cfg['elite_method']!r}"
        )
    if not 0.0 < cfg["eta"] <= 1.0:
        raise ConfigError(f"eta must lie in (0, 1], got {cfg['eta']}")
    if cfg["k"] < 1:
        raise ConfigError(f"k must be >= 1, got {cfg['k']}")
    if not 0.0 < cfg["gamma"] < 1.0:
        raise ConfigError(f"gamma must lie in (0, 1), got {cfg['gamma']}")
    if cfg["order"] < 1:
        raise ConfigError(f"order must be >= 1, got {cfg['order']}")
    for key in ("hidden", "epochs", "max_iters", "patience", "train_per_class",
                "val_size", "test_size"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be >= 1, got {cfg[key]}")
    for key in ("surrogate_lr", "attack_lr"):
        if cfg[key] < 0:
            raise ConfigError(f"{key} must be >= 0, got {cfg[key]}")
    if cfg["weight_decay"] < 0:
        raise ConfigError(f"weight_decay must be >= 0, got {cfg['weight_decay']}")
    if cfg["workers"] < 0:
        raise ConfigError(f"workers must be >= 0, got {cfg['workers']}")
    cfg["seeds"] = _parse_seeds(cfg["seeds"])
    return cfg


def resolve_config(args: argparse.Namespace) -> dict:
    """DEFAULTS <- config file <- environment <- flags, then validation."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
        unknown = sorted(set(file_cfg) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config file keys: {', '.join(unknown)}")
        cfg.update(file_cfg)
    env_out = os.environ.get(OUTPUT_DIR_ENV)
    if env_out:
        cfg["output_dir"] = env_out
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return _validate(cfg)


# Operational knobs that do not influence computed results stay out of the
# hash so reruns into a different scratch directory stamp the same identity.
_UNHASHED_KEYS = frozenset({"output_dir", "workers"})


def config_hash(cfg: dict) -> str:
    hashed = {k: v for k, v in cfg.items() if k not in _UNHASHED_KEYS}
    canon = json.dumps(hashed, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def _add_common_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or TOML config file")
    p.add_argument("--dataset", help="dataset name (default cora)")
    p.add_argument("--data-dir", dest="data_dir", help="directory holding <dataset>.content/.cites")
    p.add_argument("--content", help="explicit path to the .content file")
    p.add_argument("--cites", help="explicit path to the .cites file")
    p.add_argument("--construction", choices=CONSTRUCTIONS)
    p.add_argument("--k", type=int, help="neighbours per node for knn construction")
    p.add_argument("--order", type=int, help="hop count for hor construction")
    p.add_argument("--gamma", type=float, help="distance quantile for l1 construction")
    p.add_argument("--row-normalize", dest="row_normalize",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--train-per-class", dest="train_per_class", type=int)
    p.add_argument("--val-size", dest="val_size", type=int)
    p.add_argument("--test-size", dest="test_size", type=int)
    p.add_argument("--hidden", type=int, help="surrogate hidden width")
    p.add_argument("--surrogate-lr", dest="surrogate_lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--eta", type=float, help="fraction of elite hyperedges to inject into")
    p.add_argument("--kernel", choices=KERNELS)
    p.add_argument("--attack-lr", dest="attack_lr", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--elite-method", dest="elite_method", choices=ELITE_METHODS)
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--seed", dest="seeds", help="alias for --seeds")
    p.add_argument("--with-baseline", dest="with_baseline",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--with-ablations", dest="with_ablations",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--binarize", action=argparse.BooleanOptionalAction, default=None,
                   help="export the injected feature row projected to {0,1}")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--workers", type=int, help="sweep worker threads (0 = auto)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hginject",
        description="Node-injection attacks against hypergraph neural networks",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one configuration over its seed list")
    _add_common_options(run_p)

    sweep_p = sub.add_parser("sweep", help="sweep one axis over the seed list")
    _add_common_options(sweep_p)
    sweep_p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    sweep_p.add_argument("--values", help="comma-separated axis values (optional)")
    return parser


def _dataset_paths(cfg: dict) -> tuple[Path, Path]:
    if cfg["content"] and cfg["cites"]:
        return Path(cfg["content"]), Path(cfg["cites"])
    base = Path(cfg["data_dir"]) if cfg["data_dir"] else Path("data") / cfg["dataset"]
    return base / f"{cfg['dataset']}.content", base / f"{cfg['dataset']}.cites"


def _load_dataset(cfg: dict) -> Dataset:
    content, cites = _dataset_paths(cfg)
    for p in (content, cites):
        if not p.exists():
            raise DataError(
                f"dataset file not found: {p} (place <name>.content/<name>.cites "
                f"under data/<name>/ or pass --content/--cites)"
            )
    log.info("loading dataset from %s", content.parent)
    return load_planetoid(content, cites)


def _build_hypergraph(cfg: dict, dataset: Dataset, features: np.ndarray) -> Hypergraph:
    c = cfg["construction"]
    log.info("building %s hypergraph", c)
    if c == "knn":
        return build_knn(features, cfg["k"])
    if c == "hor":
        return build_hor(dataset.edges, dataset.num_nodes, cfg["order"])
    return build_l1(features, cfg["gamma"])


def _format_rate(value: float) -> str:
    return f"{value:.4f}"


def _make_row(cfg: dict, chash: str, method: str, seed, rates: dict) -> dict:
    return {
        "dataset": cfg["dataset"],
        "construction": cfg["construction"],
        "method": method,
        "eta": cfg["eta"],
        "kernel": cfg["kernel"],
        "seed": seed,
        "config_hash": chash,
        "version": __version__,
        **rates,
    }


def _attack_rows(
    cfg: dict,
    chash: str,
    h: Hypergraph,
    features: np.ndarray,
    dataset: Dataset,
    seed: int,
    params,
    method_label: str | None = None,
) -> tuple[list[dict], AttackResult]:
    """Injection attack for one seed, plus optional baseline/ablation rows."""
    splits = make_splits(
        dataset, cfg["train_per_class"], cfg["val_size"], cfg["test_size"], seed
    )
    attack_cfg = AttackConfig(
        eta=cfg["eta"],
        kernel=cfg["kernel"],
        learning_rate=cfg["attack_lr"],
        max_iters=cfg["max_iters"],
        patience=cfg["patience"],
        seed=seed,
        elite_method=cfg["elite_method"],
    )

    def rates_of(result: AttackResult) -> dict:
        return {
            "clean_rate": result.clean_rate,
            "attacked_rate": result.attacked_rate,
            "pca_rate": evaluate_under_detection(result, features, "pca"),
            "hbos_rate": evaluate_under_detection(result, features, "hbos"),
        }

    log.info("seed %d: attacking (eta=%s, kernel=%s)", seed, cfg["eta"], cfg["kernel"])
    result = run_attack(params, h, features, dataset.labels, splits, attack_cfg)
    rows = [_make_row(cfg, chash, method_label or "injection", seed, rates_of(result))]

    if cfg["with_baseline"]:
        log.info("seed %d: random-injection baseline", seed)
        baseline = random_injection_baseline(
            params, h, features, dataset.labels, splits, len(result.budget), seed
        )
        rows.append(_make_row(cfg, chash, "random_baseline", seed, rates_of(baseline)))
    if cfg["with_ablations"]:
        for which in ABLATIONS:
            log.info("seed %d: ablation %s", seed, which)
            ablated = run_attack(
                params, h, features, dataset.labels, splits, attack_cfg, variant=which
            )
            rows.append(_make_row(cfg, chash, which, seed, rates_of(ablated)))
    return rows, result


def _write_csv(rows: list[dict], seeds: list[int], path: Path) -> None:
    """One row per run, plus one mean±std summary row per method group."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    _format_rate(row[c]) if c.endswith("_rate") else str(row[c])
                    for c in CSV_COLUMNS
                ]
            )
        if len(seeds) > 1:
            groups: dict[tuple, list[dict]] = {}
            for row in rows:
                key = (row["dataset"], row["construction"], row["method"],
                       row["eta"], row["kernel"])
                groups.setdefault(key, []).append(row)
            for key in sorted(groups, key=str):
                group = groups[key]
                cells = list(map(str, key)) + ["summary"]
                for col in ("clean_rate", "attacked_rate", "pca_rate", "hbos_rate"):
                    vals = np.array([r[col] for r in group], dtype=np.float64)
                    std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
                    cells.append(f"{float(np.mean(vals)):.4f}±{std:.4f}")
                cells += [group[0]["config_hash"], group[0]["version"]]
                writer.writerow(cells)


def _write_run_artifacts(
    cfg: dict,
    chash: str,
    out: Path,
    rows: list[dict],
    results: dict[int, AttackResult],
    surrogates: dict[int, object],
    embeddings: dict[int, np.ndarray],
) -> None:
    _write_csv(rows, cfg["seeds"], out / "results.csv")
    doc = {"config": {**cfg, "config_hash": chash, "version": __version__}, "rows": rows}
    (out / "results.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str))
    for seed, result in results.items():
        z_mal = result.z_mal
        if cfg["binarize"]:
            z_mal = binarize_features(z_mal)
        payload = json.loads(result.to_json())
        payload["z_mal"] = z_mal.tolist()
        (out / f"attack_seed{seed}.json").write_text(json.dumps(payload, sort_keys=True))
    for seed, params in surrogates.items():
        np.savez(out / f"surrogate_seed{seed}.npz", theta1=params.theta1, theta2=params.theta2)
    for seed, emb in embeddings.items():
        np.save(out / f"embeddings_seed{seed}.npy", emb)
    plot_rates(rows, out / "rates.png")
    plot_loss_traces({s: r.loss_trace for s, r in results.items()}, out / "loss_traces.png")


def _prepare(cfg: dict):
    dataset = _load_dataset(cfg)
    features = row_normalize(dataset.features) if cfg["row_normalize"] else dataset.features
    h = _build_hypergraph(cfg, dataset, features)
    adjacency = normalized_adjacency(h)
    return dataset, features, h, adjacency


def _train_for_seed(cfg: dict, adjacency, features, dataset, seed: int):
    log.info("seed %d: training surrogate (%d epochs)", seed, cfg["epochs"])
    splits = make_splits(
        dataset, cfg["train_per_class"], cfg["val_size"], cfg["test_size"], seed
    )
    params, history = train_surrogate(
        adjacency,
        features,
        dataset.labels,
        splits.train_idx,
        TrainConfig(
            hidden_dim=cfg["hidden"],
            learning_rate=cfg["surrogate_lr"],
            epochs=cfg["epochs"],
            weight_decay=cfg["weight_decay"],
            seed=seed,
        ),
    )
    return params, history


def cmd_run(cfg: dict) -> int:
    chash = config_hash(cfg)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    dataset, features, h, adjacency = _prepare(cfg)

    rows: list[dict] = []
    results: dict[int, AttackResult] = {}
    surrogates: dict[int, object] = {}
    embeddings: dict[int, np.ndarray] = {}
    for seed in cfg["seeds"]:
        params, _ = _train_for_seed(cfg, adjacency, features, dataset, seed)
        surrogates[seed] = params
        embeddings[seed] = hidden_embeddings(adjacency, features, params)
        seed_rows, result = _attack_rows(cfg, chash, h, features, dataset, seed, params)
        rows.extend(seed_rows)
        results[seed] = result

    _write_run_artifacts(cfg, chash, out, rows, results, surrogates, embeddings)
    log.info("wrote %s", out / "results.csv")
    return 0


def _sweep_values(cfg: dict, axis: str, raw: str | None) -> list:
    if raw:
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if axis == "eta":
            try:
                return [float(p) for p in parts]
            except ValueError as exc:
                raise ConfigError(f"bad eta values {raw!r}") from exc
        return parts
    if axis == "eta":
        return [round(0.1 * i, 1) for i in range(1, 11)]
    if axis == "kernel":
        return list(KERNELS)
    return list(ELITE_METHODS)


def cmd_sweep(cfg: dict, axis: str, values_raw: str | None) -> int:
    values = _sweep_values(cfg, axis, values_raw)
    for v in values:
        probe = dict(cfg)
        probe[{"eta": "eta", "kernel": "kernel", "elite_method": "elite_method"}[axis]] = v
        _validate({**probe, "seeds": list(cfg["seeds"])})

    chash = config_hash({**cfg, "sweep_axis": axis, "sweep_values": values})
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    dataset, features, h, adjacency = _prepare(cfg)

    surrogates = {
        seed: _train_for_seed(cfg, adjacency, features, dataset, seed)[0]
        for seed in cfg["seeds"]
    }

    jobs = [(value, seed) for value in values for seed in cfg["seeds"]]

    def one(job):
        value, seed = job
        job_cfg = dict(cfg)
        key = {"eta": "eta", "kernel": "kernel", "elite_method": "elite_method"}[axis]
        job_cfg[key] = value
        label = str(value) if axis == "elite_method" else None
        # Hash the job's effective config so each row's provenance matches
        # what a standalone run with that config would stamp.
        job_rows, _ = _attack_rows(
            job_cfg, config_hash(job_cfg), h, features, dataset, seed,
            surrogates[seed], method_label=label,
        )
        return job_rows

    workers = cfg["workers"] or min(4, len(jobs))
    log.info("sweeping %s over %s with %d workers", axis, values, workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_job = list(pool.map(one, jobs))
    else:
        per_job = [one(job) for job in jobs]

    rows = [row for job_rows in per_job for row in job_rows]
    _write_csv(rows, cfg["seeds"], out / "results.csv")
    doc = {
        "config": {**cfg, "sweep_axis": axis, "sweep_values": values,
                   "config_hash": chash, "version": __version__},
        "rows": rows,
    }
    (out / "results.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str))
    plot_sweep(rows, axis, out / f"sweep_{axis}.png")
    plot_rates(rows, out / "rates.png")
    log.info("wrote %s", out / "results.csv")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_sweep(cfg, args.axis, args.values)
    except ConfigError as exc:
        print(f"hginject: config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"hginject: data error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"hginject: divergence: {exc}", file=sys.stderr)
        return 4
    except HginjectError as exc:
        print(f"hginject: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
