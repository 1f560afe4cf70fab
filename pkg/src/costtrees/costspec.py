"""Attack cost-driven constraints.

A constraint maps every (point, feature) pair to the interval the attacker
can reach. Two flavours exist: a per-feature box ``[x - l_j, x + h_j]``,
optionally derived from cost categories, and an ordered list of
conditioned rules keyed on the label and the current model score.

Config files are JSON documents (``"schema": 1``); see ``presets/`` and the
README for the layout.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

SCHEMA_VERSION = 1


class CostConfigError(ValueError):
    pass


class CostCategory(enum.Enum):
    NEGLIGIBLE = "N"
    LOW = "L"
    MEDIUM = "M"
    HIGH = "H"

    @classmethod
    def parse(cls, s):
        if isinstance(s, cls):
            return s
        key = str(s).strip().upper()
        for c in cls:
            if key in (c.value, c.name):
                return c
        raise CostConfigError(f"unknown cost category {s!r}")

    @property
    def variable(self):
        return VARIABLE_OF[self]


VARIABLE_OF = {
    CostCategory.NEGLIGIBLE: "alpha",
    CostCategory.LOW: "beta",
    CostCategory.MEDIUM: "gamma",
    CostCategory.HIGH: "mu",
}


class PerturbationInterval(NamedTuple):
    lo: float
    hi: float


def check_variables(v):
    """Validate ``mu <= gamma <= beta <= alpha`` (all >= 0).

    Families that merge two categories repeat a value, so equality is
    allowed; only a strict reversal is rejected.
    """
    try:
        a, b, g, m = (float(v[k]) for k in ("alpha", "beta", "gamma", "mu"))
    except KeyError as exc:
        raise CostConfigError(f"missing constraint variable {exc.args[0]!r}") from None
    if min(a, b, g, m) < 0:
        raise CostConfigError("constraint variables must be non-negative")
    for lo_name, lo, hi_name, hi in (("mu", m, "gamma", g), ("gamma", g, "beta", b), ("beta", b, "alpha", a)):
        if lo > hi:
            raise CostConfigError(f"ordering violated: {lo_name}={lo} > {hi_name}={hi}")
    return {"alpha": a, "beta": b, "gamma": g, "mu": m}


@dataclass(frozen=True)
class BoxConstraint:
    """Per-feature allowance: feature j may drop by ``l[j]`` and rise by ``h[j]``."""

    l: np.ndarray
    h: np.ndarray
    increase: tuple | None = None  # CostCategory per feature, when category-derived
    decrease: tuple | None = None
    variables: dict | None = None
    family: str | None = None
    name: str | None = None

    needs_score = False
    monotone = True  # bounds are monotone in the feature value

    def __post_init__(self):
        l = np.atleast_1d(np.asarray(self.l, dtype=float))
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if l.shape != h.shape:
            raise CostConfigError("l and h must have the same length")
        if (l < 0).any() or (h < 0).any() or not (np.isfinite(l).all() and np.isfinite(h).all()):
            raise CostConfigError("box allowances must be finite and non-negative")
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "h", h)

    @classmethod
    def uniform(cls, eps, d, name=None):
        return cls(np.full(d, float(eps)), np.full(d, float(eps)), name=name)

    @classmethod
    def zeros(cls, d):
        return cls.uniform(0.0, d, name="zero")

    @classmethod
    def from_categories(cls, increase, decrease, variables, family=None, name=None):
        v = check_variables(variables)
        inc = tuple(CostCategory.parse(c) for c in increase)
        dec = tuple(CostCategory.parse(c) for c in decrease)
        h = [v[c.variable] for c in inc]
        l = [v[c.variable] for c in dec]
        return cls(np.array(l), np.array(h), inc, dec, v, family, name)

    @property
    def d(self):
        return self.l.shape[0]

    @property
    def is_zero(self):
        return not (self.l.any() or self.h.any())

    def bounds(self, values, j, labels=None, scores=None):
        return values - self.l[j], values + self.h[j]


@dataclass(frozen=True)
class Rule:
    """Guarded interval action.

    ``label`` is ``"benign"``, ``"malicious"`` or ``None`` (any). The score
    guard compares the model's positive-class probability. Actions:

    * ``fixed``: symmetric allowance ``[x - a, x + a]``
    * ``absolute``: ``[lo, hi]`` where either end may be ``"x"``
    * ``relative``: ``[x + lo * x, x + hi * x]`` (ordered)
    """

    action: str
    params: dict
    label: str | None = None
    score_gt: float | None = None
    score_le: float | None = None
    features: tuple | None = None

    @property
    def needs_score(self):
        return self.score_gt is not None or self.score_le is not None

    def matches(self, labels, scores, j):
        n = labels.shape[0]
        m = np.ones(n, dtype=bool)
        if self.features is not None and j not in self.features:
            return np.zeros(n, dtype=bool)
        if self.label == "benign":
            m &= labels == 0
        elif self.label == "malicious":
            m &= labels == 1
        if self.score_gt is not None:
            m &= scores > self.score_gt
        if self.score_le is not None:
            m &= scores <= self.score_le
        return m

    def interval(self, x):
        p = self.params
        if self.action == "fixed":
            a = float(p.get("allowance", 0.0))
            return x - a, x + a
        if self.action == "absolute":
            lo = x if p["lo"] == "x" else np.full_like(x, float(p["lo"]))
            hi = x if p["hi"] == "x" else np.full_like(x, float(p["hi"]))
            return np.minimum(lo, x), np.maximum(hi, x)
        if self.action == "relative":
            a = x + float(p["lo"]) * x
            b = x + float(p["hi"]) * x
            return np.minimum(a, b), np.maximum(a, b)
        raise CostConfigError(f"unknown rule action {self.action!r}")


_ACTIONS = ("fixed", "absolute", "relative")


@dataclass(frozen=True)
class ConditionedConstraint:
    """First matching rule wins; the last rule must be an unconditional default."""

    rules: tuple
    d: int | None = None
    name: str | None = None

    monotone = False

    def __post_init__(self):
        if not self.rules:
            raise CostConfigError("conditioned constraint needs at least one rule")
        last = self.rules[-1]
        if last.label is not None or last.needs_score or last.features is not None:
            raise CostConfigError("last rule must be an unconditional default")

    @property
    def needs_score(self):
        return any(r.needs_score for r in self.rules)

    @property
    def is_zero(self):
        return all(r.action == "fixed" and float(r.params.get("allowance", 0)) == 0 for r in self.rules)

    def bounds(self, values, j, labels, scores=None):
        values = np.asarray(values, dtype=float)
        labels = np.asarray(labels)
        if self.needs_score:
            if scores is None:
                raise CostConfigError("conditioned constraint needs model scores")
            scores = np.asarray(scores, dtype=float)
        lo = np.empty_like(values)
        hi = np.empty_like(values)
        todo = np.ones(values.shape[0], dtype=bool)
        for rule in self.rules:
            m = todo & rule.matches(labels, scores, j)
            if m.any():
                lo[m], hi[m] = rule.interval(values[m])
                todo &= ~m
        return lo, hi


def interval_for(c, point, j, score=None):
    """Reachable interval of feature ``j`` for ``point`` (no clipping)."""
    x = np.asarray([point.features[j]], dtype=float)
    lab = np.asarray([point.label])
    if c.needs_score and score is None:
        raise CostConfigError("this constraint inspects the model score; pass score=")
    sc = None if score is None else np.asarray([score], dtype=float)
    lo, hi = c.bounds(x, j, lab, sc)
    return PerturbationInterval(float(lo[0]), float(hi[0]))


def partition_for_threshold(values, ids, eta, lo, hi):
    """Split points at ``x < eta`` into (left certain, right certain, uncertain).

    A left point is uncertain when it can reach ``eta`` (``hi >= eta``); a
    right point when it can drop below it (``lo < eta``). The uncertain ids
    come back ordered by (value, id).
    """
    values = np.asarray(values, dtype=float)
    ids = np.asarray(ids)
    left = values < eta
    unc = np.where(left, np.asarray(hi) >= eta, np.asarray(lo) < eta)
    order = np.lexsort((ids, values))
    ids_o, left_o, unc_o = ids[order], left[order], unc[order]
    return (
        ids_o[left_o & ~unc_o].tolist(),
        ids_o[~left_o & ~unc_o].tolist(),
        ids_o[unc_o].tolist(),
    )


# --- config files ----------------------------------------------------------


def _parse_rule(r, where):
    action = r.get("action")
    if isinstance(action, dict):
        params = {k: v for k, v in action.items() if k != "type"}
        action = action.get("type")
    else:
        params = dict(r.get("params", {}))
    if action not in _ACTIONS:
        raise CostConfigError(f"{where}: unknown action {action!r}")
    label = r.get("label")
    if label not in (None, "any", "benign", "malicious"):
        raise CostConfigError(f"{where}: label must be benign/malicious/any")
    feats = r.get("features")
    return Rule(
        action=action,
        params=params,
        label=None if label == "any" else label,
        score_gt=r.get("score_gt"),
        score_le=r.get("score_le"),
        features=None if feats is None else tuple(int(f) for f in feats),
    )


def _bind_features(entries, d, feature_names, where):
    """Order feature entries to match the dataset columns."""
    names = [e.get("name") for e in entries]
    if feature_names is not None and all(n is not None for n in names):
        pos = {n: i for i, n in enumerate(feature_names)}
        unknown = [n for n in names if n not in pos]
        if unknown:
            raise CostConfigError(f"{where}: unknown feature name(s) {unknown}")
        if len(set(names)) != len(feature_names):
            missing = [n for n in feature_names if n not in names]
            raise CostConfigError(f"{where}: no entry for feature(s) {missing}")
        by_name = dict(zip(names, entries))
        return [by_name[n] for n in feature_names]
    if d is not None and len(entries) != d:
        raise CostConfigError(f"{where}: {len(entries)} feature entries for d={d}")
    return entries


def parse_cost_config(doc, d=None, feature_names=None, where="<config>"):
    if doc.get("schema") != SCHEMA_VERSION:
        raise CostConfigError(f"{where}: expected schema {SCHEMA_VERSION}, got {doc.get('schema')!r}")
    if feature_names is not None:
        d = len(feature_names)
    name = doc.get("name")
    kind = doc.get("kind", "box")
    if kind == "conditioned":
        rules = tuple(_parse_rule(r, f"{where}: rules[{i}]") for i, r in enumerate(doc.get("rules", [])))
        return ConditionedConstraint(rules, d, name)
    if kind != "box":
        raise CostConfigError(f"{where}: unknown kind {kind!r}")
    if "uniform" in doc:
        if d is None:
            raise CostConfigError(f"{where}: uniform box needs the feature count")
        return BoxConstraint.uniform(doc["uniform"], d, name=name)
    entries = doc.get("features")
    if not entries:
        raise CostConfigError(f"{where}: box config needs 'features' or 'uniform'")
    entries = _bind_features(entries, d, feature_names, where)
    if all("increase" in e and "decrease" in e for e in entries):
        if "variables" not in doc:
            raise CostConfigError(f"{where}: category features need 'variables'")
        return BoxConstraint.from_categories(
            [e["increase"] for e in entries],
            [e["decrease"] for e in entries],
            doc["variables"],
            family=doc.get("family"),
            name=name,
        )
    if all("l" in e and "h" in e for e in entries):
        return BoxConstraint([e["l"] for e in entries], [e["h"] for e in entries], name=name)
    raise CostConfigError(f"{where}: each feature needs (increase, decrease) or (l, h)")


def load_cost_config(path, d=None, feature_names=None):
    """Load a constraint from a JSON file or a bundled preset name (``"M2"``)."""
    p = Path(path)
    if not p.exists():
        # bare preset names and "presets/M2.json" fall back to the bundled copies
        if p.stem in preset_names() and p.suffix in ("", ".json"):
            return load_preset(p.stem, d, feature_names)
        raise CostConfigError(f"cost config not found: {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CostConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_cost_config(doc, d, feature_names, where=str(path))


def preset_names():
    root = resources.files("costtrees") / "presets"
    return sorted(f.name[:-5] for f in root.iterdir() if f.name.endswith(".json"))


def preset_document(name):
    root = resources.files("costtrees") / "presets"
    return json.loads((root / f"{name}.json").read_text())


def load_preset(name, d=None, feature_names=None):
    return parse_cost_config(preset_document(name), d, feature_names, where=f"preset {name}")


def box_to_config(c: BoxConstraint, feature_names=None):
    names = feature_names or [f"f{j}" for j in range(c.d)]
    doc = {"schema": SCHEMA_VERSION, "kind": "box", "name": c.name}
    if c.increase is not None:
        doc["family"] = c.family
        doc["variables"] = c.variables
        doc["features"] = [
            {"name": n, "increase": i.value, "decrease": dd.value}
            for n, i, dd in zip(names, c.increase, c.decrease)
        ]
    else:
        doc["features"] = [{"name": n, "l": float(a), "h": float(b)} for n, a, b in zip(names, c.l, c.h)]
    return doc
