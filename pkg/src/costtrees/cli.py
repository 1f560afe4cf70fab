"""Command-line entry point: train, attack, eval, grid-search, oracle-compare."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .attack import (
    AttackError,
    AttackLimits,
    adaptive_weights_from_box,
    batch_attack,
    emit_lp,
    encode_milp,
    l1,
    l2,
    linf,
    resolve_infinite,
    weighted,
    write_attack_csv,
)
from .costspec import BoxConstraint, CostConfigError, load_cost_config
from .dataset import DatasetError, apply_normalization, load_libsvm, normalize, sample_indices, split_train_val
from .ensemble import ModelError, TrainParams, grid_search, load_model, save_model, train_model, write_grid_csv
from .metrics import (
    MetricsError,
    accuracy_fpr,
    recall_at_fpr,
    robustness_summary,
    roc_auc,
    write_robustness_csv,
    write_roc_csv,
)
from .oracle import sample_instances, summarize, write_oracle_csv
from .splitter import SplitterError

logger = logging.getLogger("costtrees")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "common": {"seed": 0, "d": "auto", "test_frac": 0.2, "out": "out", "threads": None},
    "train": {
        "model": "gbdt", "trees": 4, "depth": 8, "lr": 0.3, "lam": 1.0, "gamma": 0.0,
        "max_features": None, "min_samples_leaf": 1, "cost": None, "eps": None, "preset": None,
    },
    "attack": {
        "obj": "linf", "cost_weights": None, "family": None, "inf_weight": "exclude",
        "n": 100, "label": None, "max_nodes": 200_000, "time_limit": 60.0, "emit_lp": None,
    },
    "eval": {},
    "grid-search": {
        "model": "gbdt", "trees_grid": "5,10,15,20,25,30,35", "depth_grid": "4,5,6,7,8",
        "val_frac": 0.1, "lr": 0.3, "lam": 1.0, "gamma": 0.0, "max_features": None,
        "min_samples_leaf": 1, "cost": None, "eps": None, "preset": None,
    },
    "oracle-compare": {"samples": 1000, "cost": None, "eps": 0.3, "score": "gini", "max_uncertain": 15},
}


def _add_common(p):
    p.add_argument("--config", help="JSON file with option values; flags override it")
    p.add_argument("--data", help="LIBSVM file")
    p.add_argument("--test", help="separate LIBSVM test file (otherwise split from --data)")
    p.add_argument("--d", help="feature count or 'auto'")
    p.add_argument("--seed", type=int)
    p.add_argument("--test-frac", type=float, dest="test_frac")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int)


def _add_train_opts(p):
    p.add_argument("--model", choices=["gbdt", "rf"])
    p.add_argument("--lr", type=float, help="boosting learning rate")
    p.add_argument("--lam", type=float, help="L2 leaf regularization")
    p.add_argument("--gamma", type=float, help="split acceptance threshold")
    p.add_argument("--max-features", dest="max_features", help="RF features per node (int, sqrt, all)")
    p.add_argument("--min-samples-leaf", type=int, dest="min_samples_leaf")
    p.add_argument("--cost", help="cost config path or preset name (M1..M19, C1..C3)")
    p.add_argument("--eps", type=float, help="uniform box of this size on every feature")
    p.add_argument("--preset", help="'natural' disables the constraint; other names load a bundled preset")


def build_parser():
    ap = argparse.ArgumentParser(prog="costtrees", description=__doc__)
    ap.add_argument("--version", action="version", version=f"costtrees {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    _add_common(p)
    _add_train_opts(p)
    p.add_argument("--trees", type=int)
    p.add_argument("--depth", type=int)

    p = sub.add_parser("attack", help="minimal-cost attacks on test points")
    _add_common(p)
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--obj", choices=["linf", "l1", "l2", "cost"])
    p.add_argument("--cost-weights", dest="cost_weights", help="category box config the weights derive from")
    p.add_argument("--family", help="cost1..cost4")
    p.add_argument("--inf-weight", dest="inf_weight", help="'exclude' (immutable) or a finite weight such as 1e6")
    p.add_argument("--n", type=int, help="number of test points")
    p.add_argument("--label", type=int, choices=[0, 1], help="attack only test points of this class")
    p.add_argument("--max-nodes", type=int, dest="max_nodes")
    p.add_argument("--time-limit", type=float, dest="time_limit")
    p.add_argument("--emit-lp", dest="emit_lp", help="directory for per-point LP files")

    p = sub.add_parser("eval", help="accuracy, FPR, ROC and recall")
    _add_common(p)
    p.add_argument("--model", dest="model_path", required=True)

    p = sub.add_parser("grid-search", help="pick trees/depth by validation accuracy")
    _add_common(p)
    _add_train_opts(p)
    p.add_argument("--trees-grid", dest="trees_grid")
    p.add_argument("--depth-grid", dest="depth_grid")
    p.add_argument("--val-frac", type=float, dest="val_frac")

    p = sub.add_parser("oracle-compare", help="greedy vs brute-force inner maximization")
    _add_common(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--cost")
    p.add_argument("--eps", type=float)
    p.add_argument("--score", choices=["gini", "xgb"])
    p.add_argument("--max-uncertain", type=int, dest="max_uncertain")
    return ap


def resolve_config(args):
    """Defaults, then the --config file, then explicit flags."""
    cfg = dict(DEFAULTS["common"])
    cfg.update(DEFAULTS[args.command])
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config: file {path} not found")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {path} is not valid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"config: {path} must hold an object")
        for k, v in doc.items():
            key = k.replace("-", "_")
            if key not in cfg and key not in ("data", "test", "model_path"):
                raise ConfigError(f"config.{k}: unknown option for '{args.command}'")
            cfg[key] = v
    for k, v in vars(args).items():
        if k in ("config", "command", "verbose"):
            continue
        if v is not None:
            cfg[k] = v
    if cfg.get("threads") is None:
        env = os.environ.get("COSTTREES_THREADS")
        try:
            cfg["threads"] = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"COSTTREES_THREADS must be an integer, got {env!r}") from None
    if cfg["threads"] < 1:
        raise ConfigError("threads: must be >= 1")
    if cfg.get("data") is None:
        raise ConfigError("data: a dataset path is required")
    for key in ("data", "test"):
        # bare dataset names resolve against ./data/
        if cfg.get(key) is not None and not Path(cfg[key]).exists() and (Path("data") / cfg[key]).exists():
            cfg[key] = str(Path("data") / cfg[key])
    for key in ("data", "test", "model_path"):
        if cfg.get(key) is not None and not Path(cfg[key]).exists():
            raise ConfigError(f"{key}: file {cfg[key]} not found")
    if not 0 < float(cfg["test_frac"]) < 1:
        raise ConfigError("test_frac: must be in (0, 1)")
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(out, command, cfg, extra=None):
    doc = {
        "command": command,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seed": cfg.get("seed"),
        "versions": {"costtrees": __version__, "python": platform.python_version(), "numpy": np.__version__},
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        doc.update(extra)
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _dump(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")


# --- data and constraints --------------------------------------------------


def load_splits(cfg):
    """Raw train/test datasets (un-normalized)."""
    d = cfg["d"]
    d = "auto" if d in (None, "auto") else int(d)
    ds = load_libsvm(cfg["data"], d)
    if cfg.get("test"):
        test = load_libsvm(cfg["test"], ds.d)
        return ds, test
    return split_train_val(ds, 1.0 - float(cfg["test_frac"]), cfg["seed"])


def load_constraint(cfg, d, feature_names=None):
    preset = cfg.get("preset")
    if preset == "natural":
        return None
    if cfg.get("eps") is not None and cfg.get("cost") is not None:
        raise ConfigError("eps/cost: give one of them, not both")
    if cfg.get("eps") is not None:
        return BoxConstraint.uniform(float(cfg["eps"]), d) if cfg["eps"] > 0 else None
    src = cfg.get("cost") or preset
    if src is None:
        return None
    return load_cost_config(src, d=d, feature_names=feature_names)


def _params(cfg, trees=None, depth=None):
    mf = cfg.get("max_features")
    if isinstance(mf, str) and mf.isdigit():
        mf = int(mf)
    return TrainParams(
        n_trees=int(trees if trees is not None else cfg["trees"]),
        max_depth=int(depth if depth is not None else cfg["depth"]),
        learning_rate=float(cfg["lr"]),
        lam=float(cfg["lam"]),
        gamma=float(cfg["gamma"]),
        max_features=mf,
        min_samples_leaf=int(cfg["min_samples_leaf"]),
        seed=int(cfg["seed"]),
        threads=int(cfg["threads"]),
    )


def _outdir(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands --------------------------------------------------------------


def cmd_train(cfg):
    out = _outdir(cfg)
    train_raw, test_raw = load_splits(cfg)
    train, norm = normalize(train_raw)
    test, _ = apply_normalization(test_raw, norm)
    constraint = load_constraint(cfg, train.d, train.feature_names)
    try:
        params = _params(cfg)
    except ModelError as exc:
        raise ConfigError(str(exc)) from None
    start = time.perf_counter()
    model = train_model(cfg["model"], train, params, constraint)
    secs = time.perf_counter() - start
    save_model(model, out / "model.json")
    acc, fpr = accuracy_fpr(model, test)
    log = {"rounds": model.log, "train_seconds": secs, "test_accuracy": acc, "test_fpr": fpr}
    _dump(out / "train_log.json", log)
    write_manifest(out, "train", cfg, {"outputs": ["model.json", "train_log.json"]})
    print(f"model -> {out / 'model.json'}  test accuracy {acc:.2f}%  fpr {'n/a' if fpr is None else f'{fpr:.2f}%'}")
    return EXIT_OK


def _eval_set(cfg, model):
    _, test_raw = load_splits(cfg)
    if model.normalization is None:
        return test_raw
    test, _ = apply_normalization(test_raw, model.normalization)
    return test


def _objective(cfg, d):
    kind = cfg["obj"]
    if kind == "linf":
        return linf()
    if kind == "l1":
        return l1()
    if kind == "l2":
        return l2()
    if kind != "cost":
        raise ConfigError(f"obj: unknown objective {kind!r}")
    if not cfg.get("cost_weights"):
        raise ConfigError("cost_weights: required for --obj cost")
    box = load_cost_config(cfg["cost_weights"], d=d)
    if not isinstance(box, BoxConstraint):
        raise ConfigError("cost_weights: must be a box config")
    if box.increase is None:
        # explicit allowances: weights inversely proportional to them
        wi = np.where(box.h > 0, 1.0 / np.where(box.h > 0, box.h, 1.0), np.inf)
        wd = np.where(box.l > 0, 1.0 / np.where(box.l > 0, box.l, 1.0), np.inf)
        return weighted(*resolve_infinite(wi, wd, cfg["inf_weight"]))
    try:
        return adaptive_weights_from_box(box, cfg.get("family"), cfg["inf_weight"])
    except AttackError as exc:
        raise ConfigError(f"family: {exc}") from None


def cmd_attack(cfg):
    out = _outdir(cfg)
    model = load_model(cfg["model_path"])
    test = _eval_set(cfg, model)
    obj = _objective(cfg, test.d)
    pool = np.arange(test.n) if cfg.get("label") is None else np.flatnonzero(test.y == int(cfg["label"]))
    idx = np.sort(pool[sample_indices(pool.size, int(cfg["n"]), cfg["seed"])])
    limits = AttackLimits(int(cfg["max_nodes"]), float(cfg["time_limit"]))
    results = batch_attack(model, test.X[idx], test.y[idx], obj, limits, ids=idx.tolist(), threads=cfg["threads"])
    write_attack_csv(results, out / "attack.csv")
    summ = robustness_summary(results)
    write_robustness_csv(summ.curve, out / "robustness.csv")
    outputs = ["attack.csv", "robustness.csv", "summary.json"]
    if cfg.get("emit_lp"):
        lp_dir = Path(cfg["emit_lp"])
        lp_dir.mkdir(parents=True, exist_ok=True)
        for i in idx.tolist():
            prog = encode_milp(model, test.X[i], int(test.y[i]), obj)
            emit_lp(prog, lp_dir / f"point_{i}.lp")
    summary = {
        "objective": obj.kind,
        "mean_distance": summ.mean_distance,
        "evaded": summ.n_used,
        "infeasible": summ.n_infeasible,
        "timeout": summ.n_timeout,
        "misclassified": summ.n_misclassified,
        "points": len(results),
    }
    _dump(out / "summary.json", summary)
    write_manifest(out, "attack", cfg, {"outputs": outputs})
    print(
        f"{len(results)} points  mean {obj.kind} {summ.mean_distance:.4f} over {summ.n_used} evaded"
        f"  ({summ.n_infeasible} infeasible, {summ.n_timeout} timeout)"
    )
    return EXIT_OK


def cmd_eval(cfg):
    out = _outdir(cfg)
    model = load_model(cfg["model_path"])
    test = _eval_set(cfg, model)
    acc, fpr = accuracy_fpr(model, test)
    res = {"accuracy": acc, "fpr": fpr, "n": test.n}
    try:
        curve = roc_auc(model, test)
    except MetricsError:
        curve = None
    if curve is not None:
        res["auc"] = curve.auc
        res.update({f"recall_at_{k}pct_fpr": recall_at_fpr(curve, k / 100) for k in (1, 5, 10)})
        write_roc_csv(curve, out / "roc.csv")
    _dump(out / "metrics.json", res)
    write_manifest(out, "eval", cfg, {"outputs": ["metrics.json", "roc.csv"]})
    print(f"accuracy {acc:.2f}%  fpr {'n/a' if fpr is None else f'{fpr:.2f}%'}" + (f"  auc {curve.auc:.4f}" if curve else ""))
    return EXIT_OK


def _int_list(s, key):
    if isinstance(s, list):
        vals = s
    else:
        vals = [v for v in str(s).split(",") if v.strip()]
    try:
        vals = [int(v) for v in vals]
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated integers, got {s!r}") from None
    if not vals:
        raise ConfigError(f"{key}: empty grid")
    return vals


def cmd_grid(cfg):
    out = _outdir(cfg)
    train_raw, _ = load_splits(cfg)
    fit, val = split_train_val(train_raw, 1.0 - float(cfg["val_frac"]), cfg["seed"])
    fit, norm = normalize(fit)
    val, _ = apply_normalization(val, norm)
    constraint = load_constraint(cfg, fit.d, fit.feature_names)
    trees = _int_list(cfg["trees_grid"], "trees_grid")
    depths = _int_list(cfg["depth_grid"], "depth_grid")
    res = grid_search(fit, val, trees, depths, cfg["model"], _params(cfg, trees[0], depths[0]), constraint)
    write_grid_csv(res.rows, out / "grid.csv")
    best = {"trees": res.best.n_trees, "depth": res.best.max_depth}
    _dump(out / "best.json", best)
    write_manifest(out, "grid-search", cfg, {"outputs": ["grid.csv", "best.json"]})
    print(f"{len(res.rows)} models; best trees={best['trees']} depth={best['depth']}")
    return EXIT_OK


def cmd_oracle_compare(cfg):
    out = _outdir(cfg)
    train_raw, _ = load_splits(cfg)
    train, _ = normalize(train_raw)
    if cfg.get("cost"):
        constraint = load_cost_config(cfg["cost"], d=train.d)
    else:
        constraint = BoxConstraint.uniform(float(cfg["eps"]), train.d)
    inst = sample_instances(train, constraint, int(cfg["samples"]), cfg["seed"], cfg["score"], int(cfg["max_uncertain"]))
    write_oracle_csv(inst, out / "oracle.csv")
    summ = summarize(inst)
    _dump(out / "oracle_summary.json", summ)
    write_manifest(out, "oracle-compare", cfg, {"outputs": ["oracle.csv", "oracle_summary.json"]})
    print(
        f"{summ['instances']} instances: greedy equal to optimum {summ['equal']} "
        f"({100 * summ['equal_fraction']:.2f}%), worse {summ['worse']}, better {summ['better']}"
    )
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "attack": cmd_attack,
    "eval": cmd_eval,
    "grid-search": cmd_grid,
    "oracle-compare": cmd_oracle_compare,
}


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, CostConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, ModelError, AttackError, MetricsError, SplitterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
