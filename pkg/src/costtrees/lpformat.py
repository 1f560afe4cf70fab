"""Reader for the subset of the CPLEX LP text format that we emit.

Used to check emitted files and to replay a variable assignment against
every constraint.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

NAME = r"[A-Za-z_][A-Za-z0-9_.]*"
_NAME_RE = re.compile(rf"^{NAME}$")
_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|inf(?:inity)?"
_TERM_RE = re.compile(rf"\s*([+-])?\s*({_NUM})?\s*({NAME})")
_QTERM_RE = re.compile(rf"\s*([+-])?\s*({_NUM})?\s*({NAME})\s*\^\s*2")
SECTIONS = {
    "minimize": "obj", "maximize": "obj", "minimum": "obj", "maximum": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "generals": "gen", "general": "gen", "end": "end",
}


class LpFormatError(ValueError):
    pass


@dataclass
class LpModel:
    sense: str = "minimize"
    objective: dict = field(default_factory=dict)
    quadratic: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)  # (name, coefs, op, rhs)
    bounds: dict = field(default_factory=dict)
    binaries: set = field(default_factory=set)

    def variables(self):
        names = set(self.objective) | set(self.quadratic) | set(self.bounds) | self.binaries
        for _, coefs, _, _ in self.constraints:
            names |= set(coefs)
        return names

    def violations(self, values, tol=1e-9):
        """Names of constraints, bounds or integrality conditions broken by ``values``."""
        bad = []
        for name, coefs, op, rhs in self.constraints:
            lhs = math.fsum(c * values.get(v, 0.0) for v, c in coefs.items())
            if op == "<=" and lhs > rhs + tol:
                bad.append(name)
            elif op == ">=" and lhs < rhs - tol:
                bad.append(name)
            elif op == "=" and abs(lhs - rhs) > tol:
                bad.append(name)
        for v, (lo, hi) in self.bounds.items():
            val = values.get(v, 0.0)
            if val < lo - tol or val > hi + tol:
                bad.append(f"bound:{v}")
        for v in self.binaries:
            if values.get(v, 0.0) not in (0.0, 1.0):
                bad.append(f"binary:{v}")
        return bad

    def objective_value(self, values):
        lin = math.fsum(c * values.get(v, 0.0) for v, c in self.objective.items())
        quad = math.fsum(c * values.get(v, 0.0) ** 2 for v, c in self.quadratic.items())
        return lin + quad


def _number(s):
    return float(s.replace(" ", ""))


def _parse_linear(text, where):
    coefs = {}
    pos = 0
    text = text.strip()
    if not text:
        return coefs
    first = True
    while pos < len(text):
        m = _TERM_RE.match(text, pos)
        if not m or m.end() == pos:
            raise LpFormatError(f"{where}: cannot parse term at {text[pos:]!r}")
        sign, num, var = m.groups()
        if sign is None and not first:
            raise LpFormatError(f"{where}: missing operator before {var!r}")
        c = _number(num) if num else 1.0
        if sign == "-":
            c = -c
        coefs[var] = coefs.get(var, 0.0) + c
        pos = m.end()
        first = False
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return coefs


def _parse_quadratic(text, where):
    m = re.fullmatch(r"\s*\[(.*)\]\s*/\s*2\s*", text)
    if not m:
        raise LpFormatError(f"{where}: quadratic block must read '[ ... ] / 2'")
    body = m.group(1)
    out = {}
    pos = 0
    while pos < len(body.rstrip()):
        q = _QTERM_RE.match(body, pos)
        if not q or q.end() == pos:
            raise LpFormatError(f"{where}: cannot parse quadratic term at {body[pos:]!r}")
        sign, num, var = q.groups()
        c = (_number(num) if num else 1.0) / 2
        out[var] = out.get(var, 0.0) + (-c if sign == "-" else c)
        pos = q.end()
    return out


def _check_name(v, where):
    if not _NAME_RE.match(v) or len(v) > 255:
        raise LpFormatError(f"{where}: invalid name {v!r}")


def parse_lp(text):
    """Parse LP text into an :class:`LpModel`; raises :class:`LpFormatError`."""
    model = LpModel()
    section = None
    seen = []
    pending = ""  # objective / constraint rows may wrap over lines
    rows = []

    def flush():
        nonlocal pending
        if pending.strip():
            rows.append((section, pending.strip()))
        pending = ""

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in SECTIONS:
            flush()
            section = SECTIONS[key]
            if section == "obj":
                model.sense = "maximize" if key.startswith("max") else "minimize"
            seen.append(section)
            if section == "end":
                break
            continue
        if section is None:
            raise LpFormatError(f"line {lineno}: content before the objective section")
        if section in ("obj", "st"):
            if re.match(rf"^\s*{NAME}\s*:", line) and pending:
                flush()
            pending += " " + line
        else:
            rows.append((section, line))
    flush()
    if not seen or seen[0] != "obj":
        raise LpFormatError("missing objective section")
    if "st" not in seen:
        raise LpFormatError("missing 'Subject To' section")
    if seen[-1] != "end":
        raise LpFormatError("missing 'End'")
    order = ["obj", "st", "bounds", "bin", "gen", "end"]
    idx = [order.index(s) for s in seen]
    if idx != sorted(idx):
        raise LpFormatError(f"sections out of order: {seen}")
    names = set()
    for section, row in rows:
        if section == "obj":
            m = re.match(rf"^\s*({NAME})\s*:(.*)$", row)
            body = m.group(2) if m else row
            if "[" in body:
                lin, quad = body.split("[", 1)
                model.quadratic = _parse_quadratic("[" + quad, "objective")
                lin = lin.strip()
                if lin.endswith("+"):
                    lin = lin[:-1]
                body = lin
            model.objective = _parse_linear(body, "objective")
        elif section == "st":
            m = re.match(rf"^\s*({NAME})\s*:(.*?)(<=|>=|=<|=>|<|>|=)\s*([+-]?\s*(?:{_NUM}))\s*$", row)
            if not m:
                raise LpFormatError(f"malformed constraint {row!r}")
            name, lhs, op, rhs = m.groups()
            if name in names:
                raise LpFormatError(f"duplicate constraint name {name!r}")
            names.add(name)
            op = {"=<": "<=", "<": "<=", "=>": ">=", ">": ">="}.get(op, op)
            model.constraints.append((name, _parse_linear(lhs, name), op, _number(rhs)))
        elif section == "bounds":
            _parse_bound(row, model)
        elif section in ("bin", "gen"):
            for v in row.split():
                _check_name(v, "binaries")
                if section == "bin":
                    model.binaries.add(v)
    for v in model.variables():
        _check_name(v, "variables")
    return model


def _parse_bound(row, model):
    toks = row.replace("<=", " <= ").replace(">=", " >= ").split()
    if len(toks) == 3 and toks[1] == "=":
        v = toks[0]
        val = _number(toks[2])
        model.bounds[v] = (val, val)
    elif len(toks) == 3 and toks[1] in ("<=", ">="):
        v, op, val = toks[0], toks[1], _number(toks[2])
        lo, hi = model.bounds.get(v, (0.0, math.inf))
        model.bounds[v] = (lo, val) if op == "<=" else (val, hi)
    elif len(toks) == 5 and toks[1] == toks[3] == "<=":
        model.bounds[toks[2]] = (_number(toks[0]), _number(toks[4]))
    elif len(toks) == 2 and toks[1].lower() == "free":
        model.bounds[toks[0]] = (-math.inf, math.inf)
    else:
        raise LpFormatError(f"malformed bound {row!r}")
    _check_name(toks[0] if len(toks) != 5 else toks[2], "bounds")
