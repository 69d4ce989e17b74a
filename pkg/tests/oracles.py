"""Reference computations by plain enumeration over raw data.

Nothing here imports the package: these are the independent oracles the
tests compare against.
"""

import itertools
import math

import numpy as np


def subsets(n):
    for r in range(n + 1):
        for c in itertools.combinations(range(n), r):
            yield frozenset(c)


def coverage(cover, weights):
    cover = np.asarray(cover, dtype=bool)
    weights = np.asarray(weights, dtype=float)

    def f(S):
        hit = set()
        for e in S:
            hit.update(np.flatnonzero(cover[e]).tolist())
        return math.fsum(weights[j] for j in hit)

    return f


def facility(ratings, r_max=5.0):
    R = np.asarray(ratings, dtype=float)

    def f(S):
        if not S:
            return 0.0
        return math.fsum(max(R[u, e] for e in S) for u in range(R.shape[0])) / (r_max * R.shape[0])

    return f


def modular(w):
    return lambda S: math.fsum(w[e] for e in S)


def partition_feasible(parts, budgets):
    def ok(S):
        return all(len(S & frozenset(p)) <= b for p, b in zip(parts, budgets))

    return ok


def forests(edges, vertices):
    """Independent sets of the graphic matroid: edge sets without a cycle."""
    out = []
    for S in subsets(len(edges)):
        parent = list(range(vertices))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        ok = True
        for e in S:
            a, b = find(edges[e][0]), find(edges[e][1])
            if a == b:
                ok = False
                break
            parent[a] = b
        if ok:
            out.append(S)
    return out


def max_min(fs, feasible, n):
    """max over feasible S of min_i f_i(S)."""
    best = -math.inf
    arg = None
    for S in subsets(n):
        if feasible(S):
            v = min(f(S) for f in fs)
            if v > best:
                best, arg = v, S
    return best, arg


def multilinear(f, y):
    y = np.asarray(y, dtype=float)
    n = y.size
    terms = []
    for S in subsets(n):
        p = 1.0
        for e in range(n):
            p *= y[e] if e in S else 1.0 - y[e]
        terms.append(p * f(S))
    return math.fsum(terms)


def softmin_hp(g, alpha, dps=50):
    """-(1/alpha) ln sum exp(-alpha g_i) at high precision."""
    import mpmath

    with mpmath.workdps(dps):
        s = mpmath.fsum(mpmath.exp(-mpmath.mpf(alpha) * mpmath.mpf(float(x))) for x in g)
        return float(-mpmath.log(s) / alpha)
