"""Robust split search.

For every feature and candidate threshold the points that the constraint
lets cross the threshold form the uncertain set. Their left/right placement
is chosen greedily to maximize the post-split score (higher is worse for
the model); the robust gain is the node score minus that worst case.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as _k

BRUTE_FORCE_LIMIT = 20


class SplitterError(ValueError):
    pass


# --- statistics ------------------------------------------------------------


class CountStats:
    """Class counts (n0, n1)."""

    __slots__ = ("n0", "n1")

    def __init__(self, n0=0, n1=0):
        self.n0 = n0
        self.n1 = n1

    @property
    def n(self):
        return self.n0 + self.n1

    def add(self, label):
        if label:
            self.n1 += 1
        else:
            self.n0 += 1

    def remove(self, label):
        if label:
            self.n1 -= 1
        else:
            self.n0 -= 1
        if self.n0 < 0 or self.n1 < 0:
            raise SplitterError("negative class count")

    def copy(self):
        return CountStats(self.n0, self.n1)

    def __eq__(self, other):
        return isinstance(other, CountStats) and (self.n0, self.n1) == (other.n0, other.n1)

    def __repr__(self):
        return f"CountStats({self.n0}, {self.n1})"


def _kahan(s, c, v):
    y = v - c
    t = s + y
    return t, (t - s) - y


class GradStats:
    """Gradient and hessian sums with compensated summation."""

    __slots__ = ("G", "H", "cG", "cH", "n")

    def __init__(self, G=0.0, H=0.0, n=0):
        self.G = float(G)
        self.H = float(H)
        self.cG = 0.0
        self.cH = 0.0
        self.n = n

    def add(self, gh):
        g, h = gh
        self.G, self.cG = _kahan(self.G, self.cG, g)
        self.H, self.cH = _kahan(self.H, self.cH, h)
        self.n += 1

    def remove(self, gh):
        g, h = gh
        self.G, self.cG = _kahan(self.G, self.cG, -g)
        self.H, self.cH = _kahan(self.H, self.cH, -h)
        self.n -= 1

    def copy(self):
        out = GradStats(self.G, self.H, self.n)
        out.cG, out.cH = self.cG, self.cH
        return out

    def __repr__(self):
        return f"GradStats(G={self.G!r}, H={self.H!r}, n={self.n})"


# --- score functions -------------------------------------------------------


def gini_score(l0, l1, r0, r1):
    """Size-weighted Gini impurity of a split; 2*a*b/n is n times the node Gini."""
    nl = l0 + l1
    nr = r0 + r1
    tot = nl + nr
    if tot == 0:
        raise SplitterError("both sides empty")
    s = 0.0
    if nl:
        s += 2.0 * l0 * l1 / nl
    if nr:
        s += 2.0 * r0 * r1 / nr
    return s / tot


def _plogp(k, n):
    if k == 0:
        return 0.0
    p = k / n
    return -k * math.log2(p)


def entropy_score(l0, l1, r0, r1):
    nl = l0 + l1
    nr = r0 + r1
    tot = nl + nr
    if tot == 0:
        raise SplitterError("both sides empty")
    s = 0.0
    if nl:
        s += _plogp(l0, nl) + _plogp(l1, nl)
    if nr:
        s += _plogp(r0, nr) + _plogp(r1, nr)
    return s / tot


def _xgb_term(G, H, lam):
    d = H + lam
    if d <= 0.0:
        return 0.0
    return G * G / d


class Gini:
    kind = "counts"
    gamma = 0.0
    name = "gini"

    raw = staticmethod(gini_score)

    def new_stats(self):
        return CountStats()

    def score(self, left, right):
        return gini_score(left.n0, left.n1, right.n0, right.n1)

    def node_score(self, stats):
        return gini_score(stats.n0, stats.n1, 0, 0)

    def score_arrays(self, l0, l1, r0, r1):
        nl = l0 + l1
        nr = r0 + r1
        with np.errstate(invalid="ignore", divide="ignore"):
            a = np.where(nl > 0, 2.0 * l0 * l1 / np.where(nl > 0, nl, 1), 0.0)
            b = np.where(nr > 0, 2.0 * r0 * r1 / np.where(nr > 0, nr, 1), 0.0)
        return (a + b) / (nl + nr)

    def __repr__(self):
        return "Gini()"


class Entropy(Gini):
    name = "entropy"
    raw = staticmethod(entropy_score)

    def score(self, left, right):
        return entropy_score(left.n0, left.n1, right.n0, right.n1)

    def node_score(self, stats):
        return entropy_score(stats.n0, stats.n1, 0, 0)

    def score_arrays(self, l0, l1, r0, r1):
        return np.array([entropy_score(*t) for t in zip(l0.tolist(), l1.tolist(), r0.tolist(), r1.tolist())])

    def __repr__(self):
        return "Entropy()"


class XgbLoss:
    """``s(L, R) = -1/2 [G_L^2/(H_L+lam) + G_R^2/(H_R+lam)]``; gain subtracts ``gamma``."""

    kind = "grad"
    name = "xgb"

    def __init__(self, lam=1.0, gamma=0.0):
        self.lam = float(lam)
        self.gamma = float(gamma)

    def new_stats(self):
        return GradStats()

    def score(self, left, right):
        if left.n == 0 and right.n == 0:
            raise SplitterError("both sides empty")
        return -0.5 * (_xgb_term(left.G, left.H, self.lam) + _xgb_term(right.G, right.H, self.lam))

    def node_score(self, stats):
        return -0.5 * _xgb_term(stats.G, stats.H, self.lam)

    def score_arrays(self, GL, HL, GR, HR):
        lam = self.lam
        with np.errstate(invalid="ignore", divide="ignore"):
            a = np.where(HL + lam > 0, GL * GL / (HL + lam), 0.0)
            b = np.where(HR + lam > 0, GR * GR / (HR + lam), 0.0)
        return -0.5 * (a + b)

    def __repr__(self):
        return f"XgbLoss(lam={self.lam}, gamma={self.gamma})"


def score(sf, left, right):
    return sf.score(left, right)


# --- inner maximization ----------------------------------------------------


def greedy_assign(uncertain, base_left, base_right, sf):
    """Place each uncertain point on the side with the larger score.

    ``uncertain`` holds per-point payloads (a label for count scores, a
    ``(g, h)`` pair for the boosting score) in ascending feature order.
    Ties go right. Returns ``(assignment, score)`` with ``True`` = left.
    """
    L = base_left.copy()
    R = base_right.copy()
    assignment = []
    for p in uncertain:
        L.add(p)
        ls = sf.score(L, R)
        L.remove(p)
        R.add(p)
        rs = sf.score(L, R)
        if ls > rs:
            R.remove(p)
            L.add(p)
            assignment.append(True)
        else:
            assignment.append(False)
    return assignment, sf.score(L, R)


def _from_scratch_score(sf, base_left, base_right, uncertain, assignment):
    if sf.kind == "counts":
        l0, l1, r0, r1 = base_left.n0, base_left.n1, base_right.n0, base_right.n1
        for p, left in zip(uncertain, assignment):
            if left:
                l0, l1 = (l0, l1 + 1) if p else (l0 + 1, l1)
            else:
                r0, r1 = (r0, r1 + 1) if p else (r0 + 1, r1)
        return sf.raw(l0, l1, r0, r1)
    gl = [base_left.G]
    hl = [base_left.H]
    gr = [base_right.G]
    hr = [base_right.H]
    nl, nr = base_left.n, base_right.n
    for (g, h), left in zip(uncertain, assignment):
        if left:
            gl.append(g)
            hl.append(h)
            nl += 1
        else:
            gr.append(g)
            hr.append(h)
            nr += 1
    L = GradStats(math.fsum(gl), math.fsum(hl), nl)
    R = GradStats(math.fsum(gr), math.fsum(hr), nr)
    return sf.score(L, R)


def greedy_assign_reference(uncertain, base_left, base_right, sf):
    """Greedy placement recomputing every score from scratch (test oracle)."""
    assignment = []
    for i in range(len(uncertain)):
        pre = uncertain[: i + 1]
        ls = _from_scratch_score(sf, base_left, base_right, pre, assignment + [True])
        rs = _from_scratch_score(sf, base_left, base_right, pre, assignment + [False])
        assignment.append(ls > rs)
    return assignment, _from_scratch_score(sf, base_left, base_right, uncertain, assignment)


def brute_force_assign(uncertain, base_left, base_right, sf, limit=BRUTE_FORCE_LIMIT):
    """Exact maximum over all ``2^k`` placements.

    Placements are enumerated in lexicographic order of the vector
    (left=0 < right=1) and the first maximum is kept.
    """
    k = len(uncertain)
    if k > limit:
        raise SplitterError(f"|uncertain|={k} exceeds brute-force limit {limit}; use greedy_assign")
    if k == 0:
        return [], sf.score(base_left, base_right)
    best_val = -math.inf
    best_code = 0
    chunk = 1 << min(k, 16)
    shifts = np.arange(k - 1, -1, -1, dtype=np.int64)
    if sf.kind == "counts":
        lab = np.array([1 if p else 0 for p in uncertain], dtype=np.int64)
    else:
        g = np.array([p[0] for p in uncertain])
        h = np.array([p[1] for p in uncertain])
    for start in range(0, 1 << k, chunk):
        codes = np.arange(start, min(start + chunk, 1 << k), dtype=np.int64)
        right = ((codes[:, None] >> shifts[None, :]) & 1).astype(bool)
        left = ~right
        if sf.kind == "counts":
            l1 = base_left.n1 + (left & (lab == 1)).sum(axis=1)
            l0 = base_left.n0 + (left & (lab == 0)).sum(axis=1)
            r1 = base_right.n1 + (right & (lab == 1)).sum(axis=1)
            r0 = base_right.n0 + (right & (lab == 0)).sum(axis=1)
            vals = sf.score_arrays(l0, l1, r0, r1)
        else:
            vals = sf.score_arrays(
                base_left.G + left @ g, base_left.H + left @ h, base_right.G + right @ g, base_right.H + right @ h
            )
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val = float(vals[i])
            best_code = int(codes[i])
    assignment = [not ((best_code >> int(s)) & 1) for s in shifts]
    # exact re-evaluation of the winning placement
    return assignment, _from_scratch_score(sf, base_left, base_right, uncertain, assignment)


def robust_worst_case(uncertain, natural, base_left, base_right, sf):
    """Worst-case score used by the split search.

    The greedy placement is a heuristic and can land below the unperturbed
    placement, which the adversary may always choose; the larger one wins.
    ``natural`` gives each uncertain point's original side (``True`` = left).
    """
    assignment, worst = greedy_assign(uncertain, base_left, base_right, sf)
    nat = _from_scratch_score(sf, base_left, base_right, uncertain, natural)
    if nat > worst:
        return list(natural), nat
    return assignment, worst


# --- split search ----------------------------------------------------------


class SplitDecision(NamedTuple):
    feature: int
    threshold: float
    gain: float
    assignment: tuple  # (point id, goes_left) per uncertain point


@dataclass
class NodeData:
    """Everything the search needs about the training points.

    ``X`` holds all training rows; a node is an index array into it. For
    count scores ``y`` is used, for the boosting score ``g`` and ``h``.
    ``labels``/``scores`` feed conditioned constraints.
    """

    X: np.ndarray
    y: np.ndarray | None = None
    g: np.ndarray | None = None
    h: np.ndarray | None = None
    scores: np.ndarray | None = None

    def payloads(self, ids, sf):
        if sf.kind == "counts":
            return [int(v) for v in self.y[ids]]
        return list(zip(self.g[ids].tolist(), self.h[ids].tolist()))

    def stats_for(self, ids, sf):
        s = sf.new_stats()
        for p in self.payloads(ids, sf):
            s.add(p)
        return s


def candidate_positions(sorted_vals):
    """Positions k (left = first k points) between distinct consecutive values.

    The first candidate (threshold at the minimum) always leaves the left
    child empty under the strict predicate and is dropped here.
    """
    if sorted_vals.size < 2:
        return np.empty(0, dtype=np.int64), np.empty(0)
    ks = np.flatnonzero(sorted_vals[1:] > sorted_vals[:-1]) + 1
    lo = sorted_vals[ks - 1]
    hi = sorted_vals[ks]
    eta = 0.5 * (lo + hi)
    bad = ~((lo < eta) & (eta <= hi))
    eta[bad] = hi[bad]
    return ks, eta


def _grad_stats(G, H, n):
    return GradStats(float(G), float(H), int(n))


def best_robust_split(data, node_ids, features, constraint, sf, min_samples_leaf=1):
    """Best (feature, threshold) by robust gain, or ``None`` if no gain > 0.

    ``constraint=None`` gives the regular search. Features are scanned in
    ascending order and thresholds ascending; only a strictly larger gain
    replaces the incumbent, so ties favour the lower feature, then the lower
    threshold.
    """
    node_ids = np.asarray(node_ids, dtype=np.int64)
    m = node_ids.size
    if m < 2:
        return None
    counts = sf.kind == "counts"
    if counts:
        yv = data.y[node_ids].astype(np.int64)
        tot1 = int(yv.sum())
        s_node = sf.raw(m - tot1, tot1, 0, 0)
        crit = _k.ENTROPY if sf.name == "entropy" else _k.GINI
    else:
        gv = np.ascontiguousarray(data.g[node_ids], dtype=float)
        hv = np.ascontiguousarray(data.h[node_ids], dtype=float)
        s_node = sf.node_score(_grad_stats(math.fsum(gv.tolist()), math.fsum(hv.tolist()), m))
    robust = constraint is not None
    msl = int(min_samples_leaf)
    best = None
    best_gain = 0.0
    for j in sorted(features):
        vals = data.X[node_ids, j]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        ks, etas = candidate_positions(sv)
        if ks.size == 0:
            continue
        lo = hi = _EMPTY
        if robust:
            gids = node_ids[order]
            lab_c = data.y[gids] if data.y is not None else None
            sc = data.scores[gids] if data.scores is not None else None
            lo, hi = constraint.bounds(sv, j, lab_c, sc)
            lo = np.ascontiguousarray(lo, dtype=float)
            hi = np.ascontiguousarray(hi, dtype=float)
        if counts:
            lab = yv[order]
            c1 = np.concatenate(([0], np.cumsum(lab))).astype(np.int64)
            feat = _FeatureScan(sv, order, lab, c1, None, None, None, None, lo, hi)
        else:
            gs = gv[order]
            hs = hv[order]
            cg = np.concatenate(([0.0], np.cumsum(gs)))
            ch = np.concatenate(([0.0], np.cumsum(hs)))
            feat = _FeatureScan(sv, order, None, None, gs, hs, cg, ch, lo, hi)
        if robust and not constraint.monotone:
            gain, i = _scan_masked(feat, ks, etas, m, msl, s_node, sf, best_gain)
        elif counts:
            gain, i = _k.scan_counts(lab, c1, lo, hi, ks, etas, m, tot1, msl, s_node, 0.0, crit, robust, best_gain)
        else:
            gain, i = _k.scan_grad(gs, hs, cg, ch, lo, hi, ks, etas, m, msl, s_node, sf.gamma, sf.lam, robust, best_gain)
        if i >= 0:
            best_gain = float(gain)
            best = (j, float(etas[i]), int(ks[i]), feat)
    if best is None:
        return None
    j, eta, k, feat = best
    if robust:
        pos, left = _winning_assignment(feat, k, eta, m, sf, constraint.monotone)
    else:
        pos, left = [], []
    assignment = tuple((int(node_ids[feat.order[p]]), bool(al)) for p, al in zip(pos, left))
    return SplitDecision(j, eta, best_gain, assignment)


_EMPTY = np.empty(0)


class _FeatureScan(NamedTuple):
    sv: np.ndarray
    order: np.ndarray
    lab: np.ndarray | None
    c1: np.ndarray | None
    gs: np.ndarray | None
    hs: np.ndarray | None
    cg: np.ndarray | None
    ch: np.ndarray | None
    lo: np.ndarray
    hi: np.ndarray


def _uncertain_positions(f, k, eta, m, monotone):
    if monotone:
        a, b = _k.uncertain_range(f.lo, f.hi, k, eta)
        return np.arange(a, b)
    pos = np.arange(m)
    return np.flatnonzero(np.where(pos < k, f.hi >= eta, f.lo < eta))


def _place(f, k, unc, m, sf):
    """Greedy placement of ``unc`` (sorted positions); returns (left flags, worst score)."""
    certain_left = np.ones(m, dtype=bool)
    certain_left[k:] = False
    certain = np.ones(m, dtype=bool)
    certain[unc] = False
    lmask = certain & certain_left
    rmask = certain & ~certain_left
    out = np.zeros(unc.size, dtype=np.bool_)
    if sf.kind == "counts":
        crit = _k.ENTROPY if sf.name == "entropy" else _k.GINI
        L1 = int(f.lab[lmask].sum())
        R1 = int(f.lab[rmask].sum())
        sub = np.ascontiguousarray(f.lab[unc])
        worst = _k.greedy_counts(sub, 0, unc.size, int(lmask.sum()) - L1, L1, int(rmask.sum()) - R1, R1, crit, out)
        if unc.size:
            n1 = int(f.c1[k])
            tot1 = int(f.c1[m])
            nat = _k.count_score(crit, k - n1, n1, (m - k) - (tot1 - n1), tot1 - n1)
    else:
        if unc.size == 0:
            a = b = k
        elif unc[-1] - unc[0] + 1 == unc.size and lmask[: unc[0]].all() and not lmask[unc[-1] + 1 :].any():
            a, b = int(unc[0]), int(unc[-1]) + 1
        else:
            a = b = -1
        if a >= 0:
            # contiguous block: same arithmetic as the compiled scan
            worst = _k.greedy_grad(
                f.gs, f.hs, a, b, f.cg[a], 0.0, f.ch[a], 0.0,
                f.cg[m] - f.cg[b], 0.0, f.ch[m] - f.ch[b], 0.0, sf.lam, out,
            )
        else:
            worst = _k.greedy_grad(
                np.ascontiguousarray(f.gs[unc]), np.ascontiguousarray(f.hs[unc]), 0, unc.size,
                float(f.gs[lmask].sum()), 0.0, float(f.hs[lmask].sum()), 0.0,
                float(f.gs[rmask].sum()), 0.0, float(f.hs[rmask].sum()), 0.0, sf.lam, out,
            )
        if unc.size:
            nat = -0.5 * (
                _k.xgb_term(f.cg[k], f.ch[k], sf.lam) + _k.xgb_term(f.cg[m] - f.cg[k], f.ch[m] - f.ch[k], sf.lam)
            )
    if unc.size and nat > worst:
        # leaving every point in place is always open to the adversary
        return unc < k, nat
    return out, worst


def _scan_masked(f, ks, etas, m, msl, s_node, sf, incumbent):
    best, best_i = incumbent, -1
    for i, (k, eta) in enumerate(zip(ks.tolist(), etas.tolist())):
        if k < msl or m - k < msl:
            continue
        unc = _uncertain_positions(f, k, eta, m, False)
        _, worst = _place(f, k, unc, m, sf)
        gain = s_node - worst - sf.gamma
        if gain > best:
            best, best_i = gain, i
    return best, best_i


def _winning_assignment(f, k, eta, m, sf, monotone):
    unc = _uncertain_positions(f, k, eta, m, monotone)
    left, _ = _place(f, k, unc, m, sf)
    return unc.tolist(), left.tolist()


def natural_split_score(data, node_ids, j, eta, sf):
    """Post-split score of the unperturbed partition at ``x_j < eta``."""
    node_ids = np.asarray(node_ids, dtype=np.int64)
    left = data.X[node_ids, j] < eta
    L = data.stats_for(node_ids[left], sf)
    R = data.stats_for(node_ids[~left], sf)
    return sf.score(L, R)


def uncertain_instance(data, node_ids, j, eta, constraint):
    """Certain-side stats and ordered uncertain ids for one candidate."""
    node_ids = np.asarray(node_ids, dtype=np.int64)
    vals = data.X[node_ids, j]
    lab = data.y[node_ids] if data.y is not None else None
    sc = data.scores[node_ids] if data.scores is not None else None
    if constraint is None:
        lo = hi = vals
    else:
        lo, hi = constraint.bounds(vals, j, lab, sc)
    positions = np.arange(node_ids.size)
    lc, rc, unc = partition_positions(vals, positions, eta, lo, hi)
    return node_ids[lc], node_ids[rc], node_ids[unc]


def partition_positions(vals, positions, eta, lo, hi):
    from .costspec import partition_for_threshold

    lc, rc, unc = partition_for_threshold(vals, positions, eta, lo, hi)
    return np.asarray(lc, dtype=np.int64), np.asarray(rc, dtype=np.int64), np.asarray(unc, dtype=np.int64)
