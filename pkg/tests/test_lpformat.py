import math

import pytest

from costtrees.lpformat import LpFormatError, parse_lp

SMALL = """\\ comment line
Minimize
 obj: 2 x + 3.5 y
Subject To
 c1: x + y >= 1
 c2: x - y <= 0.5
 c3: x
   + 2 z = 1
Bounds
 0 <= x <= 4
 y >= 0.25
 w free
Binaries
 z
End
"""


def test_parse_small_program():
    m = parse_lp(SMALL)
    assert m.sense == "minimize"
    assert m.objective == {"x": 2.0, "y": 3.5}
    names = [c[0] for c in m.constraints]
    assert names == ["c1", "c2", "c3"]
    assert m.constraints[2][1] == {"x": 1.0, "z": 2.0}
    assert m.bounds["x"] == (0.0, 4.0)
    assert m.bounds["y"] == (0.25, math.inf)
    assert m.bounds["w"] == (-math.inf, math.inf)
    assert m.binaries == {"z"}


def test_violations_and_objective():
    m = parse_lp(SMALL)
    ok = {"x": 0.5, "y": 0.5, "z": 0.25}
    # z is binary, so 0.25 is flagged
    assert m.violations(ok) == ["binary:z"]
    good = {"x": 1.0, "y": 0.5, "z": 0.0}
    assert m.violations(good) == []
    assert m.objective_value(good) == pytest.approx(3.75)
    bad = {"x": 5.0, "y": 0.0, "z": 1.0}
    v = m.violations(bad)
    assert "c2" in v and "c3" in v and "bound:x" in v and "bound:y" in v


def test_quadratic_block():
    text = "Minimize\n obj: u + [ 2 u ^ 2 + 4 v ^ 2 ] / 2\nSubject To\n c: u + v >= 1\nEnd\n"
    m = parse_lp(text)
    assert m.objective == {"u": 1.0}
    assert m.quadratic == {"u": 1.0, "v": 2.0}
    assert m.objective_value({"u": 1.0, "v": 0.5}) == pytest.approx(2.5)


@pytest.mark.parametrize(
    "text, match",
    [
        ("stray\nMinimize\n obj: x\nSubject To\n c: x >= 1\nEnd\n", "before the objective"),
        ("Subject To\n c: x >= 1\nEnd\n", "missing objective"),
        ("Minimize\n obj: x\nEnd\n", "Subject To"),
        ("Minimize\n obj: x\nSubject To\n c: x >= 1\n", "End"),
        ("Minimize\n obj: x\nBounds\n x >= 0\nSubject To\n c: x >= 1\nEnd\n", "out of order"),
        ("Minimize\n obj: x\nSubject To\n c: x >= 1\n c: x <= 2\nEnd\n", "duplicate"),
        ("Minimize\n obj: x\nSubject To\n c: x >= \nEnd\n", "malformed constraint"),
        ("Minimize\n obj: x\nSubject To\n c: x y >= 1\nEnd\n", "missing operator"),
        ("Minimize\n obj: x\nSubject To\n c: x >= 1\nBounds\n x <= <= 2\nEnd\n", "malformed bound"),
        ("Minimize\n obj: x + [ x ] / 2\nSubject To\n c: x >= 1\nEnd\n", "quadratic"),
    ],
)
def test_rejects_malformed(text, match):
    with pytest.raises(LpFormatError, match=match):
        parse_lp(text)


def test_maximize_and_operator_aliases():
    m = parse_lp("Maximize\n obj: x\nSubject To\n c: x =< 3\n d: x => 1\nEnd\n")
    assert m.sense == "maximize"
    assert [c[2] for c in m.constraints] == ["<=", ">="]
