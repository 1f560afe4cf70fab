import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from costtrees.costspec import (
    BoxConstraint,
    CostCategory,
    CostConfigError,
    ConditionedConstraint,
    Rule,
    box_to_config,
    interval_for,
    load_cost_config,
    load_preset,
    parse_cost_config,
    partition_for_threshold,
    preset_names,
)
from costtrees.dataset import DataPoint

# benign points stay put; confident malicious points may rise to 1; the rest get 0.05
EXAMPLE_RULES = {
    "schema": 1,
    "kind": "conditioned",
    "rules": [
        {"label": "benign", "action": "fixed", "params": {"allowance": 0}},
        {"label": "malicious", "score_gt": 0.9, "action": "absolute", "params": {"lo": "x", "hi": 1.0}},
        {"action": "fixed", "params": {"allowance": 0.05}},
    ],
}


def pt(*xs, label=1):
    return DataPoint(np.array(xs, dtype=float), label)


def test_box_interval():
    c = BoxConstraint([0.05], [0.02])
    lo, hi = interval_for(c, pt(0.5), 0)
    assert lo == pytest.approx(0.45) and hi == pytest.approx(0.52)


def test_uniform_box_is_symmetric():
    c = BoxConstraint.uniform(0.1, 3)
    assert interval_for(c, pt(0.2, 0.5, 0.9), 2) == pytest.approx((0.8, 1.0))


def test_conditioned_rules():
    c = parse_cost_config(EXAMPLE_RULES, d=2)
    assert interval_for(c, pt(0.3, 0.4, label=0), 0, score=0.95) == (0.3, 0.3)
    assert interval_for(c, pt(0.3, 0.4, label=1), 0, score=0.95) == (0.3, 1.0)
    lo, hi = interval_for(c, pt(0.3, 0.4, label=1), 1, score=0.5)
    assert (lo, hi) == pytest.approx((0.35, 0.45))


def test_conditioned_needs_score():
    c = parse_cost_config(EXAMPLE_RULES, d=2)
    with pytest.raises(CostConfigError, match="score"):
        interval_for(c, pt(0.3, 0.4), 0)


def test_relative_rule_scales_with_value():
    r = Rule("relative", {"lo": -0.5, "hi": 0.1})
    lo, hi = r.interval(np.array([0.4]))
    assert lo[0] == pytest.approx(0.2) and hi[0] == pytest.approx(0.44)


def test_default_rule_required():
    with pytest.raises(CostConfigError, match="default"):
        ConditionedConstraint((Rule("fixed", {"allowance": 0.1}, label="benign"),))


def test_zero_box_has_no_uncertain_points():
    vals = np.linspace(0, 1, 11)
    for eta in (0.05, 0.5, 1.0):
        _, _, unc = partition_for_threshold(vals, np.arange(11), eta, vals, vals)
        assert unc == []


def test_nine_point_layout():
    vals = np.arange(1, 10) / 10.0
    ids = np.arange(1, 10)
    c = BoxConstraint([0.1], [0.3])
    lo, hi = c.bounds(vals, 0)
    left, right, unc = partition_for_threshold(vals, ids, 0.55, lo, hi)
    assert unc == [3, 4, 5, 6]
    assert left == [1, 2]
    assert right == [7, 8, 9]


def test_point_on_threshold_can_cross_left():
    _, _, unc = partition_for_threshold([0.5], [0], 0.5, [0.49], [0.5])
    assert unc == [0]


def test_uncertain_ids_sorted_by_value_then_id():
    _, _, unc = partition_for_threshold([0.5, 0.4, 0.5, 0.45], [9, 3, 2, 7], 0.45, [0.0] * 4, [1.0] * 4)
    assert unc == [3, 7, 2, 9]


def test_preset_c1():
    c = load_preset("C1", d=5)
    np.testing.assert_array_equal(c.l, np.full(5, 0.03))
    np.testing.assert_array_equal(c.h, np.full(5, 0.03))


def test_preset_m1_variables():
    c = load_preset("M1")
    assert c.variables == {"alpha": 0.08, "beta": 0.04, "gamma": 0.02, "mu": 0.0}
    assert c.d == 25


def test_preset_m2_variables():
    c = load_preset("M2")
    assert c.variables == {"alpha": 0.12, "beta": 0.06, "gamma": 0.03, "mu": 0.0}
    assert c.family == "cost1"


def test_all_presets_ship():
    names = preset_names()
    assert {f"M{i}" for i in range(1, 20)} <= set(names)
    assert {"C1", "C2", "C3"} <= set(names)
    for n in names:
        load_preset(n, d=25)


def test_preset_by_path_falls_back_to_bundle():
    c = load_cost_config("presets/C2.json", d=4)
    assert c.l[0] == pytest.approx(0.05)


def test_category_mapping():
    c = BoxConstraint.from_categories("NLMH", "HMLN", {"alpha": 0.4, "beta": 0.3, "gamma": 0.2, "mu": 0.1})
    np.testing.assert_array_equal(c.h, [0.4, 0.3, 0.2, 0.1])
    np.testing.assert_array_equal(c.l, [0.1, 0.2, 0.3, 0.4])
    assert c.increase[0] is CostCategory.NEGLIGIBLE


def test_reversed_variables_rejected():
    doc = {
        "schema": 1,
        "variables": {"alpha": 0.05, "beta": 0.06, "gamma": 0.03, "mu": 0},
        "features": [{"increase": "N", "decrease": "L"}],
    }
    with pytest.raises(CostConfigError, match="beta=0.06 > alpha=0.05"):
        parse_cost_config(doc)


def test_unknown_feature_name():
    doc = {
        "schema": 1,
        "variables": {"alpha": 0.1, "beta": 0.05, "gamma": 0.02, "mu": 0},
        "features": [{"name": "a", "increase": "N", "decrease": "L"}, {"name": "zz", "increase": "N", "decrease": "L"}],
    }
    with pytest.raises(CostConfigError, match="zz"):
        parse_cost_config(doc, feature_names=["a", "b"])


def test_features_bound_by_name():
    doc = {
        "schema": 1,
        "features": [{"name": "b", "l": 0.2, "h": 0.0}, {"name": "a", "l": 0.1, "h": 0.3}],
    }
    c = parse_cost_config(doc, feature_names=["a", "b"])
    np.testing.assert_array_equal(c.l, [0.1, 0.2])


def test_schema_and_category_errors():
    with pytest.raises(CostConfigError, match="schema"):
        parse_cost_config({"schema": 2, "uniform": 0.1}, d=1)
    with pytest.raises(CostConfigError, match="category"):
        CostCategory.parse("X")
    with pytest.raises(CostConfigError, match="non-negative"):
        BoxConstraint([-0.1], [0.1])


def test_missing_file(tmp_path):
    with pytest.raises(CostConfigError, match="not found"):
        load_cost_config(tmp_path / "nope.json")


def test_box_config_round_trip(tmp_path):
    c = load_preset("M7")
    p = tmp_path / "m7.json"
    p.write_text(json.dumps(box_to_config(c, [f"f{j}" for j in range(c.d)])))
    again = load_cost_config(p, d=c.d)
    np.testing.assert_array_equal(again.l, c.l)
    np.testing.assert_array_equal(again.h, c.h)


boxes = st.tuples(st.floats(0, 0.5), st.floats(0, 0.5))


@settings(max_examples=200, deadline=None)
@given(boxes, boxes, st.floats(0, 1), st.integers(0, 2**31))
def test_larger_box_never_shrinks_uncertain_set(small, extra, eta, seed):
    rng = np.random.default_rng(seed)
    vals = rng.random(25)
    ids = np.arange(25)
    a = BoxConstraint([small[0]], [small[1]])
    b = BoxConstraint([small[0] + extra[0]], [small[1] + extra[1]])
    _, _, ua = partition_for_threshold(vals, ids, eta, *a.bounds(vals, 0))
    _, _, ub = partition_for_threshold(vals, ids, eta, *b.bounds(vals, 0))
    assert set(ua) <= set(ub)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 0.5), st.floats(0, 0.5), st.floats(-0.2, 1.2), st.integers(0, 2**31))
def test_partition_covers_all_points(l, h, eta, seed):
    rng = np.random.default_rng(seed)
    vals = np.round(rng.random(30), 1)
    ids = np.arange(30)
    lo, hi = BoxConstraint([l], [h]).bounds(vals, 0)
    left, right, unc = partition_for_threshold(vals, ids, eta, lo, hi)
    assert sorted(left + right + unc) == list(range(30))
    assert not set(left) & set(right) and not set(left) & set(unc) and not set(right) & set(unc)
    assert all(vals[i] < eta for i in left) and all(vals[i] >= eta for i in right)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 0.5))
def test_uniform_box_matches_linf_ball(x, eps):
    lo, hi = interval_for(BoxConstraint.uniform(eps, 1), pt(x), 0)
    assert (lo, hi) == (x - eps, x + eps)
