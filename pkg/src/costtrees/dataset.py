"""LIBSVM ingestion, min-max normalization and seeded splits."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

# Known binary label conventions, mapped (negative, positive) -> (0, 1).
LABEL_CONVENTIONS = [
    (0.0, 1.0),
    (-1.0, 1.0),
    (2.0, 6.0),  # binary MNIST 2 vs. 6
    (2.0, 4.0),  # Wisconsin breast cancer: benign / malignant
]


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DataPoint:
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Normalization:
    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, X):
        span = self.maxs - self.mins
        safe = np.where(span > 0, span, 1.0)
        out = (X - self.mins) / safe
        # constant features map to 0
        return np.where(span > 0, out, 0.0)

    def invert(self, Z):
        return Z * (self.maxs - self.mins) + self.mins

    def to_dict(self):
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mins"], dtype=float), np.asarray(d["maxs"], dtype=float))


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix ``X`` (n x d) with labels ``y`` in {0, 1}."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str] | None = None
    normalization: Normalization | None = None
    ids: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise DatasetError(f"feature matrix must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DatasetError(f"{y.shape[0]} labels for {X.shape[0]} rows")
        if y.size and not np.isin(y, (0, 1)).all():
            raise DatasetError(f"labels must be 0/1, got {sorted(set(y.tolist()))}")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DatasetError("feature_names length does not match d")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.ids is None:
            object.__setattr__(self, "ids", np.arange(X.shape[0]))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return DataPoint(self.X[i], int(self.y[i]))

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, X=self.X[idx], y=self.y[idx], ids=self.ids[idx])

    def check_trainable(self):
        present = set(np.unique(self.y).tolist())
        if present != {0, 1}:
            raise DatasetError(f"training data needs both classes, found {sorted(present)}")


def _map_labels(raw, path):
    distinct = sorted(set(raw))
    for neg, pos in LABEL_CONVENTIONS:
        if set(distinct) <= {neg, pos}:
            return [1 if v == pos else 0 for v in raw]
    raise DatasetError(f"{path}: non-binary label set {distinct}")


def load_libsvm(path, d="auto", feature_names=None):
    """Read a LIBSVM text file into a dense :class:`Dataset`.

    Indices are 1-based; absent indices are 0. ``d="auto"`` uses the largest
    index seen.
    """
    path = Path(path)
    labels, rows = [], []
    max_idx = 0
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
                entries = {}
                for tok in parts[1:]:
                    k, v = tok.split(":", 1)
                    k = int(k)
                    if k < 1:
                        raise ValueError(f"index {k} < 1")
                    entries[k] = float(v)
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed line ({exc})") from None
            if entries:
                max_idx = max(max_idx, max(entries))
            labels.append(label)
            rows.append(entries)
    if not rows:
        raise DatasetError(f"{path}: no data")
    if d == "auto" or d is None:
        d = max_idx
    d = int(d)
    if max_idx > d:
        raise DatasetError(f"{path}: feature index {max_idx} exceeds d={d}")
    X = np.zeros((len(rows), d))
    for i, entries in enumerate(rows):
        for k, v in entries.items():
            X[i, k - 1] = v
    return Dataset(X, np.array(_map_labels(labels, path)), feature_names)


def save_libsvm(ds, path):
    with open(path, "w") as fh:
        for x, y in zip(ds.X, ds.y):
            feats = " ".join(f"{j + 1}:{v!r}" for j, v in enumerate(x.tolist()) if v != 0)
            fh.write(f"{int(y)} {feats}\n".rstrip() + "\n")


def fit_normalization(ds):
    if ds.n == 0:
        raise DatasetError("cannot normalize an empty dataset")
    return Normalization(ds.X.min(axis=0), ds.X.max(axis=0))


def apply_normalization(ds, params):
    """Map ``ds`` with previously fitted params. Out-of-range values are kept."""
    Z = params.apply(ds.X)
    outside = int(np.count_nonzero((Z < 0) | (Z > 1)))
    if outside:
        logger.warning("%d normalized values fall outside [0, 1]", outside)
    return replace(ds, X=Z, normalization=params), outside


def normalize(ds):
    """Fit min-max params on ``ds`` and return ``(normalized, params)``."""
    params = fit_normalization(ds)
    out, _ = apply_normalization(ds, params)
    return out, params


def denormalize(ds):
    if ds.normalization is None:
        raise DatasetError("dataset carries no normalization params")
    return replace(ds, X=ds.normalization.invert(ds.X), normalization=None)


def round_half_up(x):
    return int(math.floor(x + 0.5))


def split_train_val(ds, fraction, seed):
    """Seeded shuffle split into sizes ``round(n * fraction)`` and the rest."""
    if not 0 < fraction < 1:
        raise DatasetError(f"fraction must be in (0, 1), got {fraction}")
    n_first = round_half_up(ds.n * fraction)
    perm = np.random.default_rng(seed).permutation(ds.n)
    return ds.subset(np.sort(perm[:n_first])), ds.subset(np.sort(perm[n_first:]))


def sample_indices(n, k, seed):
    """First ``k`` positions of a seeded shuffle of ``range(n)``."""
    perm = np.random.default_rng(seed).permutation(n)
    return perm[: min(k, n)]


def make_synthetic(n, d, seed, n_informative=None, noise=0.1, feature_names=None):
    """Binary task on [0, 1]^d: label from a sparse linear rule plus label noise."""
    rng = np.random.default_rng(seed)
    k = n_informative or max(2, d // 2)
    X = rng.random((n, d))
    w = np.zeros(d)
    w[:k] = rng.choice([-1.0, 1.0], k) * rng.uniform(0.5, 1.5, k)
    logits = (X - 0.5) @ w * 6
    y = (logits + rng.normal(0, noise * 6, n) > 0).astype(int)
    return Dataset(X, y, feature_names)
