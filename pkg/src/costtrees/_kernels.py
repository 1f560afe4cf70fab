"""Compiled inner loops of the split search.

Everything here is plain scalar/array code so numba can compile it; without
numba the same functions run as ordinary Python and give identical results.
"""
import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

HAVE_NUMBA = njit.__module__.startswith("numba")

GINI, ENTROPY = 0, 1


@njit(cache=True)
def _plogp(k, n):
    if k == 0:
        return 0.0
    return -k * math.log2(k / n)


@njit(cache=True)
def count_score(crit, l0, l1, r0, r1):
    nl = l0 + l1
    nr = r0 + r1
    s = 0.0
    if crit == GINI:
        if nl:
            s += 2.0 * l0 * l1 / nl
        if nr:
            s += 2.0 * r0 * r1 / nr
    else:
        if nl:
            s += _plogp(l0, nl) + _plogp(l1, nl)
        if nr:
            s += _plogp(r0, nr) + _plogp(r1, nr)
    return s / (nl + nr)


@njit(cache=True)
def xgb_term(G, H, lam):
    d = H + lam
    if d <= 0.0:
        return 0.0
    return G * G / d


@njit(cache=True)
def greedy_counts(lab, a, b, L0, L1, R0, R1, crit, out):
    """Greedy placement of positions a..b-1; ``out[p - a]`` = goes left."""
    for p in range(a, b):
        if lab[p]:
            ls = count_score(crit, L0, L1 + 1, R0, R1)
            rs = count_score(crit, L0, L1, R0, R1 + 1)
            if ls > rs:
                L1 += 1
                out[p - a] = True
            else:
                R1 += 1
                out[p - a] = False
        else:
            ls = count_score(crit, L0 + 1, L1, R0, R1)
            rs = count_score(crit, L0, L1, R0 + 1, R1)
            if ls > rs:
                L0 += 1
                out[p - a] = True
            else:
                R0 += 1
                out[p - a] = False
    return count_score(crit, L0, L1, R0, R1)


@njit(cache=True)
def greedy_grad(gs, hs, a, b, GL, cGL, HL, cHL, GR, cGR, HR, cHR, lam, out):
    """Same for the boosting score, with compensated sums."""
    tl = xgb_term(GL, HL, lam)
    tr = xgb_term(GR, HR, lam)
    for p in range(a, b):
        g = gs[p]
        h = hs[p]
        y = g - cGL
        gl = GL + y
        cgl = (gl - GL) - y
        y = h - cHL
        hl = HL + y
        chl = (hl - HL) - y
        y = g - cGR
        gr = GR + y
        cgr = (gr - GR) - y
        y = h - cHR
        hr = HR + y
        chr_ = (hr - HR) - y
        tl2 = xgb_term(gl, hl, lam)
        tr2 = xgb_term(gr, hr, lam)
        ls = -0.5 * (tl2 + tr)
        rs = -0.5 * (tl + tr2)
        if ls > rs:
            GL, cGL, HL, cHL, tl = gl, cgl, hl, chl, tl2
            out[p - a] = True
        else:
            GR, cGR, HR, cHR, tr = gr, cgr, hr, chr_, tr2
            out[p - a] = False
    return -0.5 * (tl + tr)


@njit(cache=True)
def uncertain_range(lo, hi, k, eta):
    """Uncertain positions form [a, b) when bounds are monotone in the value."""
    a = np.searchsorted(hi[:k], eta, side="left")
    b = k + np.searchsorted(lo[k:], eta, side="left")
    return a, b


@njit(cache=True)
def scan_counts(lab, c1, lo, hi, ks, etas, m, tot1, msl, s_node, gamma, crit, robust, incumbent):
    """Index of the first candidate beating ``incumbent`` by the most, or -1."""
    best_i = -1
    best = incumbent
    out = np.zeros(m, dtype=np.bool_)
    for i in range(ks.size):
        k = ks[i]
        if k < msl or m - k < msl:
            continue
        if robust:
            a, b = uncertain_range(lo, hi, k, etas[i])
        else:
            a, b = k, k
        L1 = c1[a]
        R1 = tot1 - c1[b]
        worst = greedy_counts(lab, a, b, a - L1, L1, (m - b) - R1, R1, crit, out)
        if a < b:
            n1 = c1[k]
            nat = count_score(crit, k - n1, n1, (m - k) - (tot1 - n1), tot1 - n1)
            if nat > worst:
                worst = nat
        gain = s_node - worst - gamma
        if gain > best:
            best = gain
            best_i = i
    return best, best_i


@njit(cache=True)
def scan_grad(gs, hs, cg, ch, lo, hi, ks, etas, m, msl, s_node, gamma, lam, robust, incumbent):
    best_i = -1
    best = incumbent
    out = np.zeros(m, dtype=np.bool_)
    for i in range(ks.size):
        k = ks[i]
        if k < msl or m - k < msl:
            continue
        if robust:
            a, b = uncertain_range(lo, hi, k, etas[i])
        else:
            a, b = k, k
        worst = greedy_grad(
            gs, hs, a, b, cg[a], 0.0, ch[a], 0.0, cg[m] - cg[b], 0.0, ch[m] - ch[b], 0.0, lam, out
        )
        if a < b:
            nat = -0.5 * (xgb_term(cg[k], ch[k], lam) + xgb_term(cg[m] - cg[k], ch[m] - ch[k], lam))
            if nat > worst:
                worst = nat
        gain = s_node - worst - gamma
        if gain > best:
            best = gain
            best_i = i
    return best, best_i
