"""Small model and data builders shared by the tests."""
from pathlib import Path

import numpy as np

from costtrees.dataset import load_libsvm, normalize, split_train_val
from costtrees.ensemble import GbdtModel, RandomForestModel, Tree

ROOT = Path(__file__).resolve().parents[1]
BREAST_CANCER = ROOT / "data" / "breast-cancer"
SPAM7 = ROOT / "data" / "spam7"


def breast_cancer_splits(seed=0):
    """Normalized (train, test) with 546/137 rows."""
    from costtrees.dataset import apply_normalization

    ds = load_libsvm(BREAST_CANCER)
    train, test = split_train_val(ds, 546 / 683, seed)
    train, norm = normalize(train)
    test, _ = apply_normalization(test, norm)
    return train, test


def stump(f, t, left, right):
    return Tree.from_nodes([{"f": f, "t": t, "l": 1, "r": 2}, {"leaf": left}, {"leaf": right}])


def random_stump_ensemble(rng, max_trees=5, max_features=4, kind=None):
    """GBDT or RF made of 1..max_trees stumps over 1..max_features features."""
    d = int(rng.integers(1, max_features + 1))
    k = int(rng.integers(1, max_trees + 1))
    kind = kind or ("gbdt" if rng.random() < 0.5 else "rf")
    grid = np.round(np.linspace(0.1, 0.9, 9), 2)  # shared values make duplicate thresholds likely
    trees = []
    for _ in range(k):
        f = int(rng.integers(d))
        t = float(rng.choice(grid))
        if kind == "gbdt":
            a, b = rng.normal(0, 1, 2)
        else:
            a, b = rng.random(2)
        trees.append(stump(f, t, float(a), float(b)))
    if kind == "gbdt":
        return GbdtModel(trees, learning_rate=1.0, base_score=float(rng.normal(0, 0.3)), n_features=d)
    return RandomForestModel(trees, n_features=d)


def random_depth2_tree(rng, d, value_scale=1.0, probabilities=False):
    nodes = [
        {"f": int(rng.integers(d)), "t": float(rng.random()), "l": 1, "r": 2},
        {"f": int(rng.integers(d)), "t": float(rng.random()), "l": 3, "r": 4},
        {"f": int(rng.integers(d)), "t": float(rng.random()), "l": 5, "r": 6},
    ]
    values = rng.random(4) if probabilities else rng.normal(0, value_scale, 4)
    nodes += [{"leaf": float(v)} for v in values]
    return Tree.from_nodes(nodes)


def pairwise_auc(scores, y):
    """P(score+ > score-) + P(tie) / 2 by comparing every pair."""
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y).astype(bool)
    pos, neg = scores[y], scores[~y]
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


def scan_recall(scores, y, fpr_target):
    """Best recall over every cutoff 'score >= t' whose FPR stays within the target."""
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y).astype(bool)
    best = 0.0
    for t in np.r_[np.unique(scores), np.inf]:
        pred = scores >= t
        fpr = (pred & ~y).sum() / (~y).sum()
        if fpr <= fpr_target:
            best = max(best, (pred & y).sum() / y.sum())
    return float(best)
