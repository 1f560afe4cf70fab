"""Gradient boosting and random forests grown with the robust splitter."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import Normalization
from .splitter import Gini, Entropy, NodeData, XgbLoss, best_robust_split

logger = logging.getLogger(__name__)

MODEL_SCHEMA = 1


class ModelError(ValueError):
    pass


def sigmoid(m):
    return 1.0 / (1.0 + np.exp(-np.asarray(m, dtype=float)))


# --- trees -----------------------------------------------------------------


@dataclass
class Tree:
    """Flat binary tree; ``feature[i] < 0`` marks a leaf holding ``value[i]``.

    Internal node ``i`` sends ``x[feature[i]] < threshold[i]`` to ``left[i]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @classmethod
    def from_nodes(cls, nodes):
        n = len(nodes)
        f = np.full(n, -1, dtype=np.int64)
        t = np.zeros(n)
        l = np.full(n, -1, dtype=np.int64)
        r = np.full(n, -1, dtype=np.int64)
        v = np.zeros(n)
        for i, nd in enumerate(nodes):
            if "leaf" in nd:
                v[i] = nd["leaf"]
            else:
                f[i], t[i], l[i], r[i] = nd["f"], nd["t"], nd["l"], nd["r"]
        return cls(f, t, l, r, v)

    def to_nodes(self):
        out = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                out.append({"leaf": float(self.value[i])})
            else:
                out.append(
                    {
                        "f": int(self.feature[i]),
                        "t": float(self.threshold[i]),
                        "l": int(self.left[i]),
                        "r": int(self.right[i]),
                    }
                )
        return out

    @property
    def n_nodes(self):
        return int(self.feature.size)

    def is_leaf(self, i):
        return self.feature[i] < 0

    def leaves(self):
        return np.flatnonzero(self.feature < 0)

    def depth(self):
        best = 0
        stack = [(0, 0)]
        while stack:
            i, dpt = stack.pop()
            if self.feature[i] < 0:
                best = max(best, dpt)
            else:
                stack.append((int(self.left[i]), dpt + 1))
                stack.append((int(self.right[i]), dpt + 1))
        return best

    def apply(self, X):
        """Leaf index reached by each row of ``X``."""
        X = np.atleast_2d(X)
        idx = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[idx] >= 0
        while active.any():
            a = rows[active]
            node = idx[a]
            go_left = X[a, self.feature[node]] < self.threshold[node]
            idx[a] = np.where(go_left, self.left[node], self.right[node])
            active = self.feature[idx] >= 0
        return idx

    def predict(self, X):
        return self.value[self.apply(X)]

    def structure(self):
        """Hashable description used for structural comparisons."""
        return tuple(
            ("leaf", float(self.value[i])) if self.feature[i] < 0
            else (int(self.feature[i]), float(self.threshold[i]), int(self.left[i]), int(self.right[i]))
            for i in range(self.n_nodes)
        )

    def thresholds(self):
        internal = self.feature >= 0
        return list(zip(self.feature[internal].tolist(), self.threshold[internal].tolist()))


class _Builder:
    """Depth-first (pre-order) node list."""

    def __init__(self):
        self.nodes = []

    def add(self):
        self.nodes.append(None)
        return len(self.nodes) - 1

    def tree(self):
        return Tree.from_nodes(self.nodes)


def grow_tree(data, root_ids, sf, max_depth, constraint, leaf_value, feature_sampler, min_samples_leaf=1):
    """Grow one tree depth-first.

    ``leaf_value(ids)`` gives a leaf's value; ``feature_sampler()`` gives the
    candidate features at each node. Children follow the unperturbed
    ``x < threshold`` partition.
    """
    b = _Builder()

    def grow(ids, depth):
        i = b.add()
        split = None
        if depth < max_depth and ids.size >= 2:
            split = best_robust_split(data, ids, feature_sampler(), constraint, sf, min_samples_leaf)
        if split is None:
            b.nodes[i] = {"leaf": float(leaf_value(ids))}
            return i
        go_left = data.X[ids, split.feature] < split.threshold
        assert depth + 1 <= max_depth
        node = {"f": int(split.feature), "t": float(split.threshold)}
        b.nodes[i] = node
        node["l"] = grow(ids[go_left], depth + 1)
        node["r"] = grow(ids[~go_left], depth + 1)
        return i

    grow(np.asarray(root_ids, dtype=np.int64), 0)
    return b.tree()


# --- params and models -----------------------------------------------------


@dataclass(frozen=True)
class TrainParams:
    n_trees: int = 10
    max_depth: int = 6
    learning_rate: float = 0.3
    lam: float = 1.0
    gamma: float = 0.0
    base_score: float = 0.0
    max_features: int | str | None = None  # RF: None -> ceil(sqrt(d))
    sample_size: int | None = None  # RF bootstrap size, None -> N
    bootstrap: bool = True
    criterion: str = "gini"
    min_samples_leaf: int = 1
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.n_trees < 0:
            raise ModelError("n_trees must be >= 0")
        if self.max_depth < 0:
            raise ModelError("max_depth must be >= 0")
        if not self.learning_rate > 0:
            raise ModelError("learning_rate must be > 0")
        if self.lam < 0 or self.gamma < 0:
            raise ModelError("lam and gamma must be >= 0")
        if self.min_samples_leaf < 1:
            raise ModelError("min_samples_leaf must be >= 1")
        if self.criterion not in ("gini", "entropy"):
            raise ModelError(f"unknown criterion {self.criterion!r}")

    def features_per_node(self, d):
        m = self.max_features
        if m is None or m == "sqrt":
            k = math.ceil(math.sqrt(d))
        elif m == "all":
            k = d
        else:
            k = int(m)
        if not 1 <= k <= d:
            raise ModelError(f"max_features={m} outside [1, {d}]")
        return k


@dataclass
class GbdtModel:
    trees: list
    learning_rate: float = 0.3
    base_score: float = 0.0
    lam: float = 1.0
    gamma: float = 0.0
    feature_names: list | None = None
    normalization: Normalization | None = None
    n_features: int | None = None
    log: list = field(default_factory=list, compare=False, repr=False)

    kind = "gbdt"

    def margin(self, X):
        X = _check_dim(self, X)
        m = np.full(X.shape[0], self.base_score, dtype=float)
        for t in self.trees:
            m = m + self.learning_rate * t.predict(X)
        return m

    def proba(self, X):
        return sigmoid(self.margin(X))


@dataclass
class RandomForestModel:
    trees: list
    seed: int = 0
    feature_names: list | None = None
    normalization: Normalization | None = None
    n_features: int | None = None
    log: list = field(default_factory=list, compare=False, repr=False)

    kind = "rf"

    def proba(self, X):
        X = _check_dim(self, X)
        if not self.trees:
            return np.full(X.shape[0], 0.5)
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total = total + t.predict(X)
        return total / len(self.trees)


def _check_dim(model, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = model.n_features
    if d is not None and X.shape[1] != d:
        raise ModelError(f"input has {X.shape[1]} features, model expects {d}")
    return X


def predict_proba(model, X):
    """Positive-class probability; scalar for a single 1-D point."""
    single = np.ndim(X) == 1
    p = model.proba(X)
    return float(p[0]) if single else p


def predict_label(model, X, cutoff=0.5):
    p = predict_proba(model, X)
    if np.ndim(p) == 0:
        return int(p >= cutoff)
    return (p >= cutoff).astype(np.int64)


# --- training --------------------------------------------------------------


def _logloss(y, m):
    # log(1 + e^{-m}) for y=1, log(1 + e^{m}) for y=0
    s = np.where(y == 1, -m, m)
    return float(np.mean(np.logaddexp(0.0, s)))


def train_gbdt(train, params, constraint=None):
    """Second-order boosting on the logistic loss.

    Per round, g = p - y and h = p(1 - p) at the current margin; each tree
    is grown with the boosting score and leaves take -G/(H+lam).
    """
    train.check_trainable()
    X, y = train.X, train.y
    d = train.d
    if constraint is not None and constraint.d != d:
        raise ModelError(f"constraint covers {constraint.d} features, data has {d}")
    sf = XgbLoss(params.lam, params.gamma)
    feats = list(range(d))
    margin = np.full(train.n, params.base_score, dtype=float)
    trees, log = [], []
    needs_score = constraint is not None and constraint.needs_score
    all_ids = np.arange(train.n)
    for t in range(params.n_trees):
        start = time.perf_counter()
        p = sigmoid(margin)
        g = p - y
        h = p * (1.0 - p)
        data = NodeData(X, y=y, g=g, h=h, scores=p if needs_score else None)

        def leaf_value(ids, g=g, h=h):
            G = math.fsum(g[ids].tolist())
            H = math.fsum(h[ids].tolist())
            den = H + params.lam
            return -G / den if den > 0 else 0.0

        tree = grow_tree(data, all_ids, sf, params.max_depth, constraint, leaf_value, lambda: feats, params.min_samples_leaf)
        trees.append(tree)
        margin = margin + params.learning_rate * tree.predict(X)
        entry = {
            "round": t + 1,
            "loss": _logloss(y, margin),
            "nodes": tree.n_nodes,
            "seconds": time.perf_counter() - start,
        }
        log.append(entry)
        logger.info("round %d loss %.6f nodes %d (%.2fs)", entry["round"], entry["loss"], entry["nodes"], entry["seconds"])
    return GbdtModel(
        trees,
        params.learning_rate,
        params.base_score,
        params.lam,
        params.gamma,
        train.feature_names,
        train.normalization,
        d,
        log,
    )


def _rf_tree(train, params, constraint, seed_seq, scores):
    rng = np.random.default_rng(seed_seq)
    n, d = train.n, train.d
    n_sample = params.sample_size or n
    if n_sample > n:
        raise ModelError(f"sample_size {n_sample} exceeds N={n}")
    if params.bootstrap:
        ids = np.sort(rng.integers(0, n, n_sample))
    else:
        ids = np.arange(n)
    k = params.features_per_node(d)
    sf = Entropy() if params.criterion == "entropy" else Gini()
    data = NodeData(train.X, y=train.y, scores=scores)
    y = train.y

    def leaf_value(node_ids):
        n1 = int(y[node_ids].sum())
        return (n1 + 1) / (node_ids.size + 2)

    def sampler():
        if k == d:
            return list(range(d))
        return sorted(rng.choice(d, k, replace=False).tolist())

    return grow_tree(data, ids, sf, params.max_depth, constraint, leaf_value, sampler, params.min_samples_leaf)


def train_random_forest(train, params, constraint=None):
    """Bagged Gini trees with per-node feature subsampling.

    Every tree draws from its own child of ``SeedSequence(seed)``, so the
    result does not depend on ``threads``.
    """
    train.check_trainable()
    if constraint is not None and constraint.d != train.d:
        raise ModelError(f"constraint covers {constraint.d} features, data has {train.d}")
    seqs = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    start = time.perf_counter()
    needs_score = constraint is not None and constraint.needs_score
    if needs_score:
        # score context comes from the trees built so far
        trees = []
        running = np.zeros(train.n)
        for i, s in enumerate(seqs):
            scores = running / i if i else np.full(train.n, 0.5)
            tree = _rf_tree(train, params, constraint, s, scores)
            trees.append(tree)
            running = running + tree.predict(train.X)
    elif params.threads > 1:
        with ThreadPoolExecutor(params.threads) as ex:
            trees = list(ex.map(lambda s: _rf_tree(train, params, constraint, s, None), seqs))
    else:
        trees = [_rf_tree(train, params, constraint, s, None) for s in seqs]
    model = RandomForestModel(trees, params.seed, train.feature_names, train.normalization, train.d)
    model.log.append({"trees": len(trees), "seconds": time.perf_counter() - start})
    return model


def train_model(kind, train, params, constraint=None):
    if kind == "gbdt":
        return train_gbdt(train, params, constraint)
    if kind == "rf":
        return train_random_forest(train, params, constraint)
    raise ModelError(f"unknown model kind {kind!r}")


# --- serialization ---------------------------------------------------------


def model_to_dict(model):
    doc = {"schema": MODEL_SCHEMA, "kind": model.kind}
    if model.kind == "gbdt":
        doc.update(
            learning_rate=model.learning_rate,
            base_score=model.base_score,
            **{"lambda": model.lam, "gamma": model.gamma},
        )
    else:
        doc["seed"] = model.seed
    doc["n_features"] = model.n_features
    doc["trees"] = [{"nodes": t.to_nodes()} for t in model.trees]
    if model.feature_names is not None:
        doc["feature_names"] = list(model.feature_names)
    if model.normalization is not None:
        doc["normalization"] = model.normalization.to_dict()
    return doc


def save_model(model, path):
    try:
        text = json.dumps(model_to_dict(model), allow_nan=False)
    except ValueError as exc:
        raise ModelError(f"model contains NaN/inf values: {exc}") from None
    Path(path).write_text(text + "\n")


def _reject_constant(name):
    raise ValueError(f"non-finite number {name}")


def _num(v, where, finite=True):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ModelError(f"{where}: expected a number, got {v!r}")
    if finite and not math.isfinite(v):
        raise ModelError(f"{where}: non-finite value")
    return v


def _check_tree(nodes, where):
    if not isinstance(nodes, list) or not nodes:
        raise ModelError(f"{where}.nodes: expected a non-empty list")
    n = len(nodes)
    seen = [False] * n
    for i, nd in enumerate(nodes):
        w = f"{where}.nodes[{i}]"
        if not isinstance(nd, dict):
            raise ModelError(f"{w}: expected an object")
        if "leaf" in nd:
            _num(nd["leaf"], f"{w}.leaf")
            continue
        for key in ("f", "t", "l", "r"):
            if key not in nd:
                raise ModelError(f"{w}: missing '{key}'")
        _num(nd["t"], f"{w}.t")
        for key in ("f", "l", "r"):
            if not isinstance(nd[key], int) or isinstance(nd[key], bool) or nd[key] < 0:
                raise ModelError(f"{w}.{key}: expected a non-negative integer")
        for key in ("l", "r"):
            c = nd[key]
            if c >= n or c == 0:
                raise ModelError(f"{w}.{key}: child index {c} out of range")
            if seen[c]:
                raise ModelError(f"{w}.{key}: node {c} has two parents")
            seen[c] = True
    # every node but the root must hang off exactly one parent, and be reachable
    reach = [False] * n
    stack = [0]
    while stack:
        i = stack.pop()
        if reach[i]:
            raise ModelError(f"{where}: cycle through node {i}")
        reach[i] = True
        if "leaf" not in nodes[i]:
            stack += [nodes[i]["l"], nodes[i]["r"]]
    if not all(reach):
        raise ModelError(f"{where}: node {reach.index(False)} unreachable from the root")


def model_from_dict(doc, where="model"):
    if not isinstance(doc, dict):
        raise ModelError(f"{where}: expected an object")
    if doc.get("schema") != MODEL_SCHEMA:
        raise ModelError(f"{where}.schema: expected {MODEL_SCHEMA}, got {doc.get('schema')!r}")
    kind = doc.get("kind")
    if kind not in ("gbdt", "rf"):
        raise ModelError(f"{where}.kind: expected 'gbdt' or 'rf', got {kind!r}")
    trees_doc = doc.get("trees")
    if not isinstance(trees_doc, list):
        raise ModelError(f"{where}.trees: expected a list")
    trees = []
    for k, td in enumerate(trees_doc):
        w = f"{where}.trees[{k}]"
        if not isinstance(td, dict):
            raise ModelError(f"{w}: expected an object")
        _check_tree(td.get("nodes"), w)
        trees.append(Tree.from_nodes(td["nodes"]))
    d = doc.get("n_features")
    max_f = max((int(t.feature.max()) for t in trees if t.n_nodes), default=-1)
    if d is not None:
        if not isinstance(d, int) or d < 1:
            raise ModelError(f"{where}.n_features: expected a positive integer")
        if max_f >= d:
            raise ModelError(f"{where}.trees: feature index {max_f} >= n_features {d}")
    names = doc.get("feature_names")
    norm = doc.get("normalization")
    norm = Normalization.from_dict(norm) if norm is not None else None
    if kind == "gbdt":
        return GbdtModel(
            trees,
            _num(doc.get("learning_rate", 0.3), f"{where}.learning_rate"),
            _num(doc.get("base_score", 0.0), f"{where}.base_score"),
            _num(doc.get("lambda", 1.0), f"{where}.lambda"),
            _num(doc.get("gamma", 0.0), f"{where}.gamma"),
            names,
            norm,
            d,
        )
    return RandomForestModel(trees, doc.get("seed", 0), names, norm, d)


def load_model(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(), parse_constant=_reject_constant)
    except FileNotFoundError:
        raise ModelError(f"{path}: no such model file") from None
    except ValueError as exc:
        raise ModelError(f"{path}: invalid model JSON ({exc})") from None
    return model_from_dict(doc, where=str(path))


# --- grid search -----------------------------------------------------------


@dataclass
class GridResult:
    best: TrainParams
    rows: list
    best_model: object = None


def grid_search(train, val, trees_grid, depth_grid, kind, params, constraint=None):
    """Train every (trees, depth) cell; best validation accuracy wins.

    Ties prefer fewer trees, then shallower trees.
    """
    if not trees_grid or not depth_grid:
        raise ModelError("grid search needs non-empty tree and depth grids")
    rows = []
    best_key, best_params, best_model = None, None, None
    for k in sorted(set(trees_grid)):
        for dpt in sorted(set(depth_grid)):
            p = replace(params, n_trees=k, max_depth=dpt)
            start = time.perf_counter()
            model = train_model(kind, train, p, constraint)
            secs = time.perf_counter() - start
            acc = float(np.mean(predict_label(model, val.X) == val.y))
            rows.append({"trees": k, "depth": dpt, "val_accuracy": acc, "seconds": round(secs, 3)})
            key = (-acc, k, dpt)
            if best_key is None or key < best_key:
                best_key, best_params, best_model = key, p, model
    return GridResult(best_params, rows, best_model)


def write_grid_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["trees", "depth", "val_accuracy", "seconds"])
        w.writeheader()
        w.writerows(rows)
