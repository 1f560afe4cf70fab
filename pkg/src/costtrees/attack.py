"""Minimal-cost evasion attacks on tree ensembles.

The ensemble is constant on every cell of the product of per-feature
threshold intervals, and all objectives here are separable per feature, so
the exact attacker searches over cells instead of real-valued points.
"""
from __future__ import annotations

import csv
import heapq
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .costspec import BoxConstraint, CostCategory
from .ensemble import predict_label

logger = logging.getLogger(__name__)

DELTA = 1e-6
MISLABEL_SLACK = 1e-6
INF = math.inf


class AttackError(ValueError):
    pass


# --- objectives ------------------------------------------------------------


@dataclass(frozen=True)
class Objective:
    """``kind`` is one of linf, l1, l2, weighted.

    Weighted cost: ``sum_j w_inc[j]*(x'-x)`` over increased features plus
    ``w_dec[j]*(x-x')`` over decreased ones; ``inf`` makes a direction
    immutable.
    """

    kind: str
    w_inc: np.ndarray | None = None
    w_dec: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("linf", "l1", "l2", "weighted"):
            raise AttackError(f"unknown objective {self.kind!r}")
        if self.kind == "weighted":
            wi = np.asarray(self.w_inc, dtype=float)
            wd = np.asarray(self.w_dec, dtype=float)
            if wi.shape != wd.shape or wi.ndim != 1:
                raise AttackError("w_inc and w_dec must be 1-D arrays of equal length")
            if (wi < 0).any() or (wd < 0).any() or np.isnan(wi).any() or np.isnan(wd).any():
                raise AttackError("weights must be >= 0")
            object.__setattr__(self, "w_inc", wi)
            object.__setattr__(self, "w_dec", wd)

    @property
    def additive(self):
        return self.kind != "linf"

    def weights(self, d):
        if self.kind == "weighted":
            if self.w_inc.size != d:
                raise AttackError(f"objective has {self.w_inc.size} weights, model has {d} features")
            return self.w_inc, self.w_dec
        return np.ones(d), np.ones(d)

    def feature_cost(self, delta, w):
        """Per-feature cost of moving by ``|delta|`` with weight ``w``."""
        if delta == 0:
            return 0.0
        if w == INF:
            return INF
        a = abs(delta)
        if self.kind == "l2":
            return a * a
        if self.kind == "weighted":
            return w * a
        return a

    def combine(self, costs):
        if self.kind == "linf":
            return max(costs, default=0.0)
        return math.fsum(costs)

    def finish(self, combined):
        return math.sqrt(combined) if self.kind == "l2" else combined

    def evaluate(self, x_adv, x):
        x_adv = np.asarray(x_adv, dtype=float)
        x = np.asarray(x, dtype=float)
        wi, wd = self.weights(x.size)
        costs = []
        for j, (a, b) in enumerate(zip(x_adv.tolist(), x.tolist())):
            w = wi[j] if a > b else wd[j]
            costs.append(self.feature_cost(a - b, w))
        return self.finish(self.combine(costs))


def linf():
    return Objective("linf")


def l1():
    return Objective("l1")


def l2():
    return Objective("l2")


def weighted(w_inc, w_dec):
    return Objective("weighted", w_inc, w_dec)


# adaptive weights (negligible, low, medium, high)
ADAPTIVE_WEIGHTS = {
    "cost1": (1.0, 2.0, 4.0, INF),
    "cost2": (1.0, 2.0, 3.0, 3.0),
    "cost3": (1.0, 1.0, 2.0, INF),
    "cost4": (1.0, 2.0, 2.0, INF),
}
BIG_WEIGHT = 1e6


def family_id(family):
    key = str(family).strip().lower().replace("_", "").replace(" ", "")
    if key.isdigit():
        key = "cost" + key
    if key not in ADAPTIVE_WEIGHTS:
        raise AttackError(f"unknown cost family {family!r}; expected one of {sorted(ADAPTIVE_WEIGHTS)}")
    return key


def adaptive_weights_from_box(box, family=None, inf_weight="exclude"):
    """Weighted objective whose per-category weights come from the family table.

    ``inf_weight="exclude"`` keeps infinite weights (the direction cannot
    move); ``"1e6"`` swaps them for a large finite weight.
    """
    if not isinstance(box, BoxConstraint) or box.increase is None or box.decrease is None:
        raise AttackError("adaptive weights need a category-derived box; pass explicit weights instead")
    fam = family_id(family if family is not None else box.family)
    table = dict(zip(CostCategory, ADAPTIVE_WEIGHTS[fam]))
    w_inc = np.array([table[CostCategory.parse(c)] for c in box.increase])
    w_dec = np.array([table[CostCategory.parse(c)] for c in box.decrease])
    return weighted(*resolve_infinite(w_inc, w_dec, inf_weight))


def resolve_infinite(w_inc, w_dec, mode):
    if mode in ("exclude", None):
        return w_inc, w_dec
    try:
        big = float(mode)
    except (TypeError, ValueError):
        raise AttackError(f"inf-weight mode must be 'exclude' or a number, got {mode!r}") from None
    return np.where(np.isinf(w_inc), big, w_inc), np.where(np.isinf(w_dec), big, w_dec)


# --- interval space --------------------------------------------------------


@dataclass
class IntervalSpace:
    """Per feature, sorted distinct thresholds; interval ``i`` of feature
    ``j`` is ``[T[i-1], T[i])`` with ``T[-1] = -inf`` and ``T[m] = +inf``."""

    thresholds: list

    @property
    def d(self):
        return len(self.thresholds)

    def n_intervals(self, j):
        return len(self.thresholds[j]) + 1

    def interval(self, j, i):
        T = self.thresholds[j]
        lo = T[i - 1] if i > 0 else -INF
        hi = T[i] if i < len(T) else INF
        return lo, hi

    def index_of(self, j, v):
        return int(np.searchsorted(self.thresholds[j], v, side="right"))


def _model_dim(model):
    if model.n_features is not None:
        return model.n_features
    return 1 + max((int(t.feature.max()) for t in model.trees), default=-1)


def build_interval_space(model, d=None):
    if not model.trees:
        raise AttackError("model has no trees")
    d = d or _model_dim(model)
    per = [set() for _ in range(d)]
    for t in model.trees:
        for f, thr in t.thresholds():
            per[f].add(thr)
    return IntervalSpace([np.array(sorted(s), dtype=float) for s in per])


def cheapest_point_in_interval(x, interval, w_inc=1.0, w_dec=1.0, delta=DELTA, squared=False):
    """Point of ``[lo, hi)`` closest to ``x`` and its cost.

    Moving up lands on ``lo`` itself (the strict predicate puts it on the
    right); moving down lands ``delta`` below ``hi``, or mid-interval when
    the interval is narrower than that.
    """
    lo, hi = interval
    if not lo < hi:
        raise AttackError(f"empty interval [{lo}, {hi})")
    if lo <= x < hi:
        return x, 0.0
    if x < lo:
        v, w = lo, w_inc
    else:
        v = hi - delta
        if v < lo:
            v = 0.5 * (lo + hi)
        w = w_dec
    if w == INF:
        return v, INF
    dist = abs(v - x)
    return v, (dist * dist if squared else w * dist)


# --- compiled model --------------------------------------------------------


@dataclass
class _Compiled:
    space: IntervalSpace
    lo: np.ndarray  # (leaves, d) first allowed interval index
    hi: np.ndarray  # (leaves, d) one past the last
    contrib: np.ndarray  # leaf contribution to the decision score
    starts: np.ndarray  # first leaf row of every tree
    tree_of: np.ndarray
    node_of: np.ndarray  # leaf's node index inside its tree
    offset: float  # label is 1 iff offset + sum(contrib) >= 0


def compile_model(model, space=None):
    """Leaf boxes in interval-index space plus per-leaf score contributions."""
    space = space or build_interval_space(model)
    d = space.d
    rows_lo, rows_hi, contrib, tree_of, node_of, starts = [], [], [], [], [], []
    if model.kind == "gbdt":
        scale, offset = model.learning_rate, model.base_score
    else:
        scale, offset = 1.0 / len(model.trees), -0.5
    for ti, t in enumerate(model.trees):
        starts.append(len(contrib))
        stack = [(0, np.zeros(d, dtype=np.int64), np.array([space.n_intervals(j) for j in range(d)], dtype=np.int64))]
        found = []
        while stack:
            i, lo, hi = stack.pop()
            if t.feature[i] < 0:
                if (lo < hi).all():
                    found.append((i, lo, hi))
                continue
            f = int(t.feature[i])
            k = int(np.searchsorted(space.thresholds[f], t.threshold[i]))
            lhi = hi.copy()
            lhi[f] = min(hi[f], k + 1)
            rlo = lo.copy()
            rlo[f] = max(lo[f], k + 1)
            stack.append((int(t.right[i]), rlo, hi))
            stack.append((int(t.left[i]), lo, lhi))
        for i, lo, hi in found:
            rows_lo.append(lo)
            rows_hi.append(hi)
            contrib.append(scale * float(t.value[i]))
            tree_of.append(ti)
            node_of.append(i)
    return _Compiled(
        space,
        np.array(rows_lo),
        np.array(rows_hi),
        np.array(contrib),
        np.array(starts, dtype=np.int64),
        np.array(tree_of, dtype=np.int64),
        np.array(node_of, dtype=np.int64),
        float(offset),
    )


class _CostTables:
    """Per-feature cost/value of moving into interval ranges ``[A, B)``."""

    def __init__(self, space, x, obj, delta):
        d = space.d
        wi, wd = obj.weights(d)
        self.obj = obj
        self.x = x
        self.ix = np.array([space.index_of(j, x[j]) for j in range(d)], dtype=np.int64)
        self.up_cost, self.up_val, self.down_cost, self.down_val = [], [], [], []
        sq = obj.kind == "l2"
        for j in range(d):
            n = space.n_intervals(j)
            uc, uv, dc, dv = [0.0] * (n + 1), [x[j]] * (n + 1), [0.0] * (n + 1), [x[j]] * (n + 1)
            for a in range(n):
                if a > self.ix[j]:
                    v, c = cheapest_point_in_interval(x[j], space.interval(j, a), wi[j], wd[j], delta, sq)
                    uv[a], uc[a] = v, (c if obj.kind != "linf" else abs(v - x[j]))
            for b in range(1, n + 1):
                if b <= self.ix[j]:
                    v, c = cheapest_point_in_interval(x[j], space.interval(j, b - 1), wi[j], wd[j], delta, sq)
                    if obj.kind == "linf":
                        c = abs(v - x[j])
                    dv[b], dc[b] = v, c
            self.up_cost.append(uc)
            self.up_val.append(uv)
            self.down_cost.append(dc)
            self.down_val.append(dv)

    def feature_costs(self, A, B):
        out = []
        for j, (a, b, i) in enumerate(zip(A, B, self.ix)):
            if a > i:
                out.append(self.up_cost[j][a])
            elif b <= i:
                out.append(self.down_cost[j][b])
            else:
                out.append(0.0)
        return out

    def point(self, A, B):
        """Cheapest point of the box and its interval index per feature."""
        x = self.x.copy()
        idx = self.ix.copy()
        for j, (a, b, i) in enumerate(zip(A, B, self.ix)):
            if a > i:
                x[j] = self.up_val[j][a]
                idx[j] = a
            elif b <= i:
                x[j] = self.down_val[j][b]
                idx[j] = b - 1
        return x, idx


# --- exact attack ----------------------------------------------------------


@dataclass(frozen=True)
class AttackLimits:
    max_nodes: int = 200_000
    time_limit: float = 60.0


@dataclass
class AttackResult:
    """``status``: adversarial, infeasible or timeout (``x_adv`` may carry
    the best example found so far, then ``optimal`` is False)."""

    status: str
    x: np.ndarray
    y: int
    initially_correct: bool
    x_adv: np.ndarray | None = None
    objective: float | None = None
    optimal: bool = False
    nodes: int = 0
    seconds: float = 0.0
    id: int | None = None
    objective_kind: str = "linf"

    @property
    def deltas(self):
        return None if self.x_adv is None else self.x_adv - self.x

    def norm(self, p):
        if self.x_adv is None:
            return None
        dlt = self.x_adv - self.x
        if p == "linf":
            return float(np.max(np.abs(dlt))) if dlt.size else 0.0
        if p == "l1":
            return float(np.sum(np.abs(dlt)))
        return float(np.sqrt(np.sum(dlt * dlt)))


def _wants_label_one(y):
    # the adversarial target label
    return 0 if y == 1 else 1


def exact_attack(model, x, y, obj=None, limits=None, delta=DELTA, compiled=None):
    """Minimum-cost point whose predicted label differs from ``y``.

    Best-first search over product boxes in interval-index space. A box's
    priority is the cost of its cheapest point, which is a lower bound for
    every cell inside it. Branching fixes the leaf of the tree with the
    fewest reachable leaves; boxes whose best achievable score cannot flip
    the label are dropped. The cheapest point of each new box is evaluated,
    and the search stops once the best such mislabeled point costs no more
    than the best open box.
    """
    obj = obj or linf()
    limits = limits or AttackLimits()
    start = time.perf_counter()
    x = np.asarray(x, dtype=float)
    y = int(y)
    if predict_label(model, x) != y:
        return AttackResult("adversarial", x, y, False, x.copy(), 0.0, True, 0, time.perf_counter() - start, objective_kind=obj.kind)
    if not model.trees:
        return AttackResult("infeasible", x, y, True, None, None, True, 0, time.perf_counter() - start, objective_kind=obj.kind)
    cm = compiled or compile_model(model)
    if x.size != cm.space.d:
        raise AttackError(f"point has {x.size} features, model has {cm.space.d}")
    tables = _CostTables(cm.space, x, obj, delta)
    target = _wants_label_one(y)
    sign = 1.0 if target == 1 else -1.0  # maximize sign * score
    reduce_ = np.maximum.reduceat if target == 1 else np.minimum.reduceat
    fill = -INF if target == 1 else INF
    n_trees = cm.starts.size
    tol = 1e-9

    def flips(score):
        return score >= 0 if target == 1 else score < 0

    def reachable(A, B):
        return ((cm.lo < B) & (cm.hi > A)).all(axis=1)

    def best_possible(mask):
        vals = np.where(mask, cm.contrib, fill)
        return cm.offset + float(reduce_(vals, cm.starts).sum())

    def evaluate_point(A, B):
        xp, idx = tables.point(A, B)
        inside = ((cm.lo <= idx) & (idx < cm.hi)).all(axis=1)
        score = cm.offset + float(cm.contrib[inside].sum())
        if flips(score) and predict_label(model, xp) != y:
            return xp
        return None

    A0 = np.zeros(cm.space.d, dtype=np.int64)
    B0 = np.array([cm.space.n_intervals(j) for j in range(cm.space.d)], dtype=np.int64)
    incumbent, inc_cost = None, INF
    heap = []
    counter = 0

    def push(A, B, mask):
        nonlocal incumbent, inc_cost, counter
        c = obj.combine(tables.feature_costs(A, B))
        if c == INF or c >= inc_cost:
            return
        if sign * best_possible(mask) < -tol:
            return
        xp = evaluate_point(A, B)
        if xp is not None:
            incumbent, inc_cost = xp, c
            return
        counter += 1
        heapq.heappush(heap, (c, counter, A, B, mask))

    push(A0, B0, reachable(A0, B0))
    expanded = 0
    status = None
    while heap:
        c, _, A, B, mask = heapq.heappop(heap)
        if c >= inc_cost:
            break
        if expanded >= limits.max_nodes or time.perf_counter() - start > limits.time_limit:
            status = "timeout"
            break
        expanded += 1
        counts = np.add.reduceat(mask.astype(np.int64), cm.starts)
        open_ = np.flatnonzero(counts > 1)
        if open_.size == 0:
            # output is constant on this box and its cheapest point was not adversarial
            continue
        t = int(open_[np.argmin(counts[open_])])
        end = cm.starts[t + 1] if t + 1 < n_trees else cm.lo.shape[0]
        for leaf in range(cm.starts[t], end):
            if not mask[leaf]:
                continue
            nA = np.maximum(A, cm.lo[leaf])
            nB = np.minimum(B, cm.hi[leaf])
            push(nA, nB, mask & reachable(nA, nB))
    secs = time.perf_counter() - start
    if status == "timeout":
        return AttackResult(
            "timeout", x, y, True, incumbent, None if incumbent is None else obj.finish(inc_cost),
            False, expanded, secs, objective_kind=obj.kind,
        )
    if incumbent is None:
        return AttackResult("infeasible", x, y, True, None, None, True, expanded, secs, objective_kind=obj.kind)
    return AttackResult("adversarial", x, y, True, incumbent, obj.finish(inc_cost), True, expanded, secs, objective_kind=obj.kind)


def batch_attack(model, X, y, obj=None, limits=None, ids=None, threads=1, delta=DELTA):
    """Attack every row; per-point timeouts are recorded, not raised."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y)
    ids = list(range(len(y))) if ids is None else list(ids)
    cm = compile_model(model) if model.trees else None

    def one(i):
        r = exact_attack(model, X[i], int(y[i]), obj, limits, delta, compiled=cm)
        r.id = ids[i]
        return r

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            out = list(ex.map(one, range(len(y))))
    else:
        out = [one(i) for i in range(len(y))]
    for r in out:
        if r.status == "adversarial" and predict_label(model, r.x_adv) == r.y:
            raise AttackError(f"point {r.id}: adversarial example does not flip the label")
    return out


def _fmt(v):
    return "" if v is None else repr(float(v))


def write_attack_csv(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "y", "status", "objective", "linf", "l1", "l2"])
        for r in results:
            w.writerow([r.id, r.y, r.status, _fmt(r.objective), _fmt(r.norm("linf")), _fmt(r.norm("l1")), _fmt(r.norm("l2"))])


def exhaustive_attack(model, x, y, obj=None, delta=DELTA, max_cells=1_000_000):
    """Reference answer: scan every interval-product cell (small models only)."""
    obj = obj or linf()
    x = np.asarray(x, dtype=float)
    if predict_label(model, x) != y:
        return 0.0, x.copy()
    space = build_interval_space(model, x.size)
    sizes = [space.n_intervals(j) for j in range(space.d)]
    if math.prod(sizes) > max_cells:
        raise AttackError("too many cells for exhaustive enumeration")
    wi, wd = obj.weights(space.d)
    options = []
    for j in range(space.d):
        opts = []
        for i in range(sizes[j]):
            v, c = cheapest_point_in_interval(x[j], space.interval(j, i), wi[j], wd[j], delta, obj.kind == "l2")
            opts.append((v, c))
        options.append(opts)
    best, best_x = INF, None
    for cell in itertools.product(*options):
        pt = np.array([v for v, _ in cell])
        costs = [c for _, c in cell] if obj.kind != "linf" else [abs(v - xj) for (v, _), xj in zip(cell, x)]
        c = obj.finish(obj.combine(costs))
        if c < best and predict_label(model, pt) != y:
            best, best_x = c, pt
    return (None, None) if best_x is None else (best, best_x)


# --- MILP encoding ---------------------------------------------------------


@dataclass
class MilpProgram:
    """Linear program over binary predicate/leaf variables.

    ``constraints`` holds ``(name, {var: coef}, sense, rhs)`` with sense in
    ``<=, >=, =``. ``quadratic`` holds squared-term coefficients of the
    objective (only for the L2 objective).
    """

    objective: dict
    constraints: list
    binaries: list
    continuous: list
    bounds: dict = field(default_factory=dict)
    quadratic: dict = field(default_factory=dict)
    sense: str = "minimize"

    def to_lp(self):
        out = ["\\ minimal-cost evasion program"]
        if self.quadratic:
            out.append("\\ quadratic objective block: needs a QP-capable solver")
        out.append("Minimize" if self.sense == "minimize" else "Maximize")
        obj = _lp_terms(self.objective)
        if self.quadratic:
            q = " + ".join(f"{_num(2 * c)} {v} ^ 2" for v, c in self.quadratic.items())
            obj = (obj + " + " if obj else "") + f"[ {q} ] / 2"
        out.append(" obj: " + (obj or "0 " + self.continuous[0]))
        out.append("Subject To")
        for name, coefs, sense, rhs in self.constraints:
            out.append(f" {name}: {_lp_terms(coefs)} {sense} {_num(rhs)}")
        out.append("Bounds")
        for v in self.continuous:
            lo, hi = self.bounds.get(v, (0.0, INF))
            if lo == hi:
                out.append(f" {v} = {_num(lo)}")
            elif hi == INF:
                out.append(f" {v} >= {_num(lo)}")
            else:
                out.append(f" {_num(lo)} <= {v} <= {_num(hi)}")
        out.append("Binaries")
        for i in range(0, len(self.binaries), 8):
            out.append(" " + " ".join(self.binaries[i : i + 8]))
        out.append("End")
        return "\n".join(out) + "\n"


def _num(v):
    return repr(float(v))


def _lp_terms(coefs):
    parts = []
    for v, c in coefs.items():
        c = float(c)
        if c == 0:
            continue
        s = "-" if c < 0 else "+"
        parts.append(f"{s} {repr(abs(c))} {v}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def encode_milp(model, x, y, obj=None, delta=DELTA, slack=MISLABEL_SLACK):
    """Predicate variable ``p_j_k`` is 1 iff ``x'_j < T_k``; leaf variable
    ``l_t_i`` selects leaf ``i`` of tree ``t``."""
    obj = obj or linf()
    x = np.asarray(x, dtype=float)
    cm = compile_model(model)
    space = cm.space
    d = space.d
    wi, wd = obj.weights(d)
    binaries, cons = [], []
    for j in range(d):
        T = space.thresholds[j]
        for k in range(T.size):
            binaries.append(f"p_{j}_{k}")
        for k in range(T.size - 1):
            cons.append((f"ord_{j}_{k}", {f"p_{j}_{k}": 1.0, f"p_{j}_{k + 1}": -1.0}, "<=", 0.0))
    leaf_var = {}
    for ti, t in enumerate(model.trees):
        leaves = [i for i in range(t.n_nodes) if t.feature[i] < 0]
        for i in leaves:
            leaf_var[(ti, i)] = f"l_{ti}_{i}"
            binaries.append(f"l_{ti}_{i}")
        cons.append((f"one_{ti}", {leaf_var[(ti, i)]: 1.0 for i in leaves}, "=", 1.0))
        for i in range(t.n_nodes):
            if t.feature[i] < 0:
                continue
            f = int(t.feature[i])
            k = int(np.searchsorted(space.thresholds[f], t.threshold[i]))
            p = f"p_{f}_{k}"
            left = {leaf_var[(ti, q)]: 1.0 for q in _subtree_leaves(t, int(t.left[i]))}
            right = {leaf_var[(ti, q)]: 1.0 for q in _subtree_leaves(t, int(t.right[i]))}
            cons.append((f"left_{ti}_{i}", {**left, p: -1.0}, "<=", 0.0))
            cons.append((f"right_{ti}_{i}", {**right, p: 1.0}, "<=", 1.0))
    # decision score = offset + sum contrib * leaf
    if model.kind == "gbdt":
        scale, offset = model.learning_rate, model.base_score
    else:
        scale, offset = 1.0 / len(model.trees), -0.5
    score = {}
    for (ti, i), v in leaf_var.items():
        score[v] = scale * float(model.trees[ti].value[i])
    if y == 1:
        cons.append(("mislabel", score, "<=", -offset - slack))
    else:
        cons.append(("mislabel", score, ">=", -offset))
    objective, quadratic, continuous, bounds = {}, {}, [], {}
    tables = _CostTables(space, x, obj, delta)
    if obj.kind == "linf":
        continuous.append("b")
        objective["b"] = 1.0
    else:
        for j in range(d):
            continuous += [f"u_{j}", f"v_{j}"]
            if wi[j] == INF:
                bounds[f"u_{j}"] = (0.0, 0.0)
            if wd[j] == INF:
                bounds[f"v_{j}"] = (0.0, 0.0)
            if obj.kind == "l2":
                quadratic[f"u_{j}"] = 1.0
                quadratic[f"v_{j}"] = 1.0
            else:
                scale_i = wi[j] if obj.kind == "weighted" and wi[j] != INF else 1.0
                scale_d = wd[j] if obj.kind == "weighted" and wd[j] != INF else 1.0
                objective[f"u_{j}"] = scale_i
                objective[f"v_{j}"] = scale_d
    for j in range(d):
        T = space.thresholds[j]
        ix = int(tables.ix[j])
        for k in range(T.size):
            p = f"p_{j}_{k}"
            if k >= ix:
                # x_j < T_k: leaving the left side means moving up to T_k
                gap = float(T[k] - x[j])
                var = "b" if obj.kind == "linf" else f"u_{j}"
                cons.append((f"up_{j}_{k}", {var: 1.0, p: gap}, ">=", gap))
            else:
                # x_j >= T_k: landing left of T_k costs the distance to the representative
                gap = float(x[j] - tables.down_val[j][k + 1])
                var = "b" if obj.kind == "linf" else f"v_{j}"
                cons.append((f"down_{j}_{k}", {var: 1.0, p: -gap}, ">=", 0.0))
    return MilpProgram(objective, cons, binaries, continuous, bounds, quadratic)


def _subtree_leaves(t, i):
    out, stack = [], [i]
    while stack:
        q = stack.pop()
        if t.feature[q] < 0:
            out.append(q)
        else:
            stack += [int(t.right[q]), int(t.left[q])]
    return out


def emit_lp(prog, path):
    text = prog.to_lp()
    with open(path, "w") as fh:
        fh.write(text)
    return text


def decode_solution(model, x_adv, x, obj=None, delta=DELTA):
    """Variable assignment of the program that corresponds to ``x_adv``."""
    obj = obj or linf()
    x_adv = np.asarray(x_adv, dtype=float)
    x = np.asarray(x, dtype=float)
    space = build_interval_space(model, x.size)
    vals = {}
    for j in range(space.d):
        for k, T in enumerate(space.thresholds[j].tolist()):
            vals[f"p_{j}_{k}"] = 1.0 if x_adv[j] < T else 0.0
    for ti, t in enumerate(model.trees):
        hit = int(t.apply(x_adv[None, :])[0])
        for i in range(t.n_nodes):
            if t.feature[i] < 0:
                vals[f"l_{ti}_{i}"] = 1.0 if i == hit else 0.0
    dlt = x_adv - x
    if obj.kind == "linf":
        vals["b"] = float(np.max(np.abs(dlt))) if dlt.size else 0.0
    else:
        for j in range(space.d):
            vals[f"u_{j}"] = max(float(dlt[j]), 0.0)
            vals[f"v_{j}"] = max(float(-dlt[j]), 0.0)
    return vals
