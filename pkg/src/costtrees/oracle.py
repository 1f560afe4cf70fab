"""Greedy-vs-optimal comparison on sampled split instances."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ensemble import TrainParams, train_gbdt, sigmoid
from .splitter import (
    Gini,
    NodeData,
    XgbLoss,
    brute_force_assign,
    candidate_positions,
    greedy_assign,
    robust_worst_case,
    uncertain_instance,
)


@dataclass(frozen=True)
class OracleInstance:
    feature: int
    threshold: float
    n_uncertain: int
    greedy_score: float
    optimal_score: float
    worst_case_score: float  # what the split search uses
    natural_score: float
    node_score: float
    gamma: float

    @property
    def equal(self):
        # incremental and from-scratch sums may differ in the last bits
        return math.isclose(self.greedy_score, self.optimal_score, rel_tol=1e-12, abs_tol=1e-12)

    @property
    def robust_gain(self):
        return self.node_score - self.worst_case_score - self.gamma

    @property
    def natural_gain(self):
        return self.node_score - self.natural_score - self.gamma


def _random_node(X, rng, max_conditions=3):
    """Points satisfying a random conjunction of axis-aligned predicates."""
    keep = np.ones(X.shape[0], dtype=bool)
    for _ in range(rng.integers(0, max_conditions + 1)):
        j = int(rng.integers(X.shape[1]))
        vals = X[keep, j]
        if vals.size < 4:
            break
        t = float(rng.choice(vals))
        side = (X[:, j] < t) if rng.random() < 0.5 else (X[:, j] >= t)
        if (keep & side).sum() >= 2:
            keep &= side
    return np.flatnonzero(keep)


def node_data(train, score="gini", seed=0):
    if score == "gini":
        return NodeData(train.X, y=train.y), Gini()
    # gradients from a short natural boosting run so they are not all equal
    model = train_gbdt(train, TrainParams(n_trees=2, max_depth=3, seed=seed))
    p = sigmoid(model.margin(train.X))
    return NodeData(train.X, y=train.y, g=p - train.y, h=p * (1 - p)), XgbLoss(1.0, 0.0)


def sample_instances(train, constraint, n_samples, seed, score="gini", max_uncertain=15, max_tries=None):
    """Draw (node, feature, threshold) instances with ``1 <= |uncertain| <= max_uncertain``."""
    rng = np.random.default_rng(seed)
    data, sf = node_data(train, score, seed)
    out = []
    tries = 0
    max_tries = max_tries or 200 * n_samples
    while len(out) < n_samples and tries < max_tries:
        tries += 1
        ids = _random_node(train.X, rng)
        j = int(rng.integers(train.d))
        sv = np.sort(train.X[ids, j])
        _, etas = candidate_positions(sv)
        if etas.size == 0:
            continue
        eta = float(rng.choice(etas))
        lc, rc, unc = uncertain_instance(data, ids, j, eta, constraint)
        if not 1 <= unc.size <= max_uncertain:
            continue
        L = data.stats_for(lc, sf)
        R = data.stats_for(rc, sf)
        payload = data.payloads(unc, sf)
        natural = (data.X[unc, j] < eta).tolist()
        _, g_score = greedy_assign(payload, L, R, sf)
        _, opt = brute_force_assign(payload, L, R, sf)
        _, worst = robust_worst_case(payload, natural, L, R, sf)
        nat_L = data.stats_for(ids[data.X[ids, j] < eta], sf)
        nat_R = data.stats_for(ids[data.X[ids, j] >= eta], sf)
        out.append(
            OracleInstance(
                j, eta, int(unc.size), g_score, opt, worst,
                sf.score(nat_L, nat_R), sf.node_score(data.stats_for(ids, sf)), sf.gamma,
            )
        )
    return out


def summarize(instances):
    n = len(instances)
    eq = sum(i.equal for i in instances)
    return {
        "instances": n,
        "equal": eq,
        "worse": sum(not i.equal and i.greedy_score < i.optimal_score for i in instances),
        "better": sum(not i.equal and i.greedy_score > i.optimal_score for i in instances),
        "equal_fraction": eq / n if n else 0.0,
    }


def write_oracle_csv(instances, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["feature", "threshold", "|ΔI|", "greedy_score", "optimal_score", "equal"])
        for i in instances:
            w.writerow([i.feature, repr(i.threshold), i.n_uncertain, repr(i.greedy_score), repr(i.optimal_score), int(i.equal)])
