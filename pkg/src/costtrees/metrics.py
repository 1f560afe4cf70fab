"""Accuracy/FPR, ROC/AUC, recall at fixed FPR and robustness summaries."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ensemble import predict_proba


class MetricsError(ValueError):
    pass


def accuracy_fpr(model, data, cutoff=0.5):
    """Percent accuracy and percent false-positive rate (None without negatives)."""
    if data.n == 0:
        raise MetricsError("empty evaluation set")
    scores = predict_proba(model, data.X)
    return accuracy_fpr_from_scores(scores, data.y, cutoff)


def accuracy_fpr_from_scores(scores, y, cutoff=0.5):
    pred = np.asarray(scores) >= cutoff
    y = np.asarray(y).astype(bool)
    acc = 100.0 * float(np.mean(pred == y))
    neg = ~y
    if not neg.any():
        return acc, None
    fp = int(np.sum(pred & neg))
    tn = int(np.sum(~pred & neg))
    return acc, 100.0 * fp / (fp + tn)


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # descending; first entry +inf gives (0, 0)
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def roc_curve(scores, y):
    """Sweep over distinct scores (predict positive when score >= threshold)."""
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("ROC needs both classes")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    yy = y[order]
    tp = np.cumsum(yy)
    fp = np.cumsum(~yy)
    # keep the last position of every group of equal scores
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tpr = np.r_[0.0, tp[last] / n_pos]
    fpr = np.r_[0.0, fp[last] / n_neg]
    thr = np.r_[np.inf, s[last]]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(thr, fpr, tpr, auc)


def roc_auc(model, data):
    return roc_curve(predict_proba(model, data.X), data.y)


def recall_at_fpr(curve, fpr_target):
    if not 0.0 <= fpr_target <= 1.0:
        raise MetricsError(f"fpr target must be in [0, 1], got {fpr_target}")
    ok = curve.fpr <= fpr_target
    return float(curve.tpr[ok].max())


@dataclass(frozen=True)
class RobustnessCurve:
    """``accuracy[i]`` is the fraction of evaluated points that are correct
    and need a perturbation larger than ``distances[i]``."""

    distances: np.ndarray
    accuracy: np.ndarray
    n_points: int
    _evasion: np.ndarray

    def at(self, d):
        return float(np.mean(self._evasion > d))

    def clean_accuracy(self):
        return float(np.mean(self._evasion > 0)) if self.n_points else 0.0


@dataclass(frozen=True)
class RobustnessSummary:
    mean_distance: float
    n_used: int
    n_infeasible: int
    n_timeout: int
    n_misclassified: int
    curve: RobustnessCurve


def _evasion_distance(r):
    if not r.initially_correct:
        return 0.0
    if r.status == "adversarial":
        return float(r.objective)
    if r.status == "infeasible":
        return math.inf
    # a timeout bounds the distance from above only when an example was found
    return float(r.objective) if r.objective is not None else math.inf


def robustness_curve(results):
    ev = np.array([_evasion_distance(r) for r in results], dtype=float)
    ds = np.unique(ev[np.isfinite(ev)])
    acc = np.array([float(np.mean(ev > d)) for d in ds])
    return RobustnessCurve(ds, acc, len(results), ev)


def robustness_summary(results):
    """Mean minimal distance over originally-correct points that were evaded.

    Infeasible points are left out of the mean and counted; they never fall
    in the curve. With no usable point the mean is 0.
    """
    results = list(results)
    if not results:
        raise MetricsError("no attack results")
    used = [float(r.objective) for r in results if r.initially_correct and r.status == "adversarial"]
    summary = RobustnessSummary(
        float(np.mean(used)) if used else 0.0,
        len(used),
        sum(r.status == "infeasible" for r in results),
        sum(r.status == "timeout" for r in results),
        sum(not r.initially_correct for r in results),
        robustness_curve(results),
    )
    return summary


# --- outputs ---------------------------------------------------------------


def write_roc_csv(curve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fpr", "tpr"])
        for f, t in zip(curve.fpr.tolist(), curve.tpr.tolist()):
            w.writerow([repr(f), repr(t)])


def write_robustness_csv(curve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "accuracy"])
        w.writerow(["0", repr(curve.clean_accuracy())])
        for d, a in zip(curve.distances.tolist(), curve.accuracy.tolist()):
            w.writerow([repr(d), repr(a)])


def pct(v):
    return "n/a" if v is None else f"{v:.2f}"


def markdown_report(rows, title=None):
    """Table with one row per model: dataset, model, trees/depth, accuracy,
    FPR, AUC, mean distance and the ratio to the row marked ``natural``."""
    cols = ["dataset", "model", "trees", "depth", "accuracy", "fpr", "auc", "avg_dist", "improv"]
    natural = {r["dataset"]: r.get("avg_dist") for r in rows if r.get("model") == "natural"}
    out = []
    if title:
        out += [f"## {title}", ""]
    out.append("| " + " | ".join(cols) + " |")
    out.append("|" + "---|" * len(cols))
    for r in rows:
        base = natural.get(r["dataset"])
        ratio = None
        if base and r.get("avg_dist") is not None and r.get("model") != "natural":
            ratio = r["avg_dist"] / base
        cells = [
            str(r["dataset"]),
            str(r["model"]),
            str(r.get("trees", "")),
            str(r.get("depth", "")),
            pct(r.get("accuracy")),
            pct(r.get("fpr")),
            "n/a" if r.get("auc") is None else f"{r['auc']:.4f}",
            "n/a" if r.get("avg_dist") is None else f"{r['avg_dist']:.4f}",
            "" if ratio is None else f"{ratio:.2f}x",
        ]
        out.append("| " + " | ".join(cells) + " |")
    return "\n".join(out) + "\n"
