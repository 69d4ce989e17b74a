"""Convex decompositions over a matroid union and randomized swap rounding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import MembershipError, ParameterError, RoundingError, SizeLimitError
from .matroids import EXPLICIT_LIMIT, PartitionMatroid, UniformMatroid, UnionMatroid
from .multilinear import fractional_point

DECOMP_TOL = 1e-9


@dataclass
class ConvexDecomposition:
    """Weights lambda_j > 0 summing to one over independent sets I_j."""

    atoms: list
    n: int

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.atoms])

    @property
    def point(self) -> np.ndarray:
        y = np.zeros(self.n)
        for w, I in self.atoms:
            y[list(I)] += w
        return y

    def check(self, U=None, y=None, tol: float = DECOMP_TOL):
        if abs(self.weights.sum() - 1.0) > tol or (self.weights <= 0).any():
            raise ParameterError("decomposition weights must be positive and sum to 1")
        if U is not None:
            for _, I in self.atoms:
                if not U.is_independent(I):
                    raise ParameterError(f"atom {sorted(I)} is not independent")
        if y is not None and np.abs(self.point - np.asarray(y)).max() > tol:
            raise ParameterError("decomposition does not reproduce the point")
        return self


def merge_atoms(atoms, n: int) -> ConvexDecomposition:
    """Drop zero weights and merge duplicate sets."""
    acc = {}
    for w, I in atoms:
        if w > 0:
            I = frozenset(I)
            acc[I] = acc.get(I, 0.0) + w
    ordered = sorted(acc.items(), key=lambda kv: sorted(kv[0]))
    return ConvexDecomposition([(w, I) for I, w in ordered], n)


def _as_partition(M):
    if isinstance(M, UniformMatroid):
        return M.as_partition()
    if isinstance(M, PartitionMatroid):
        return M
    return None


def waterfill(y, parts, caps) -> ConvexDecomposition:
    """Decompose y into sets meeting each part at most caps[j] times.

    Per part, the coordinates are laid end to end as intervals on [0, y(P_j));
    for u in [0, 1) the set S(u) holds the elements whose interval contains a
    point of u + Z. Each interval has length at most one, so P[e in S(u)] = y_e,
    and |S(u) cap P_j| <= ceil(y(P_j)) <= caps[j]. One u serves every part, so
    atoms sit between consecutive fractional breakpoints.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    y = y.copy()
    for j, part in enumerate(parts):
        idx = list(part)
        s = y[idx].sum()
        if s > caps[j]:
            if s > caps[j] + 1e-9:
                raise MembershipError(
                    f"part {j} carries mass {s:.6g} > {caps[j]}",
                    {"S": sorted(idx), "A": sorted(idx), "lhs": float(s), "rhs": float(caps[j])},
                )
            y[idx] *= caps[j] / s
    starts = np.zeros(n)
    for part in parts:
        idx = list(part)
        cum = np.cumsum(y[idx])
        starts[idx] = cum - y[idx]
    ends = starts + y
    breaks = np.unique(np.concatenate([[0.0, 1.0], np.mod(starts, 1.0), np.mod(ends, 1.0)]))
    atoms = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        w = hi - lo
        if w <= 1e-15:
            continue
        u = 0.5 * (lo + hi)
        # smallest point of u + Z at or after the interval start
        m = np.ceil(starts - u)
        pt = u + m
        inside = (y > 0) & (pt >= starts) & (pt < ends)
        atoms.append((w, frozenset(np.flatnonzero(inside).tolist())))
    return merge_atoms(atoms, n)


def _violation(y, U: UnionMatroid):
    # With y <= 1 the tightest inequality y(S) <= |S - A| + l r(A) has S = A.
    n = y.size
    best = None
    for mask in range(1, 1 << n):
        A = frozenset(e for e in range(n) if mask >> e & 1)
        lhs = float(y[list(A)].sum())
        rhs = U.ell * U.base.rank(A)
        if lhs > rhs + 1e-9 and (best is None or lhs - rhs > best["lhs"] - best["rhs"]):
            best = {"S": sorted(A), "A": sorted(A), "lhs": lhs, "rhs": float(rhs)}
    return best


def decompose(y, U: UnionMatroid) -> ConvexDecomposition:
    """Write y as a convex combination of independent sets of U.

    Partition and uniform bases use water-filling; other bases (n <= 12) solve
    a feasibility LP over all independent sets and, on failure, report the
    violated rank inequality.
    """
    y = fractional_point(y, U.n)
    pm = _as_partition(U.base)
    if pm is not None:
        caps = [U.ell * b for b in pm.budgets]
        d = waterfill(y, pm.parts, caps)
        return d
    if U.n > EXPLICIT_LIMIT:
        raise SizeLimitError(f"generic decomposition refused for n={U.n} > {EXPLICIT_LIMIT}")
    n = U.n
    family = [frozenset(e for e in range(n) if m >> e & 1) for m in range(1 << n)]
    family = [I for I in family if U.is_independent(I)]
    A = np.zeros((n + 1, len(family)))
    for j, I in enumerate(family):
        A[list(I), j] = 1.0
    A[n, :] = 1.0
    b = np.concatenate([y, [1.0]])
    res = linprog(np.zeros(len(family)), A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        v = _violation(y, U)
        raise MembershipError("point lies outside the union matroid polytope", v)
    atoms = [(float(w), family[j]) for j, w in enumerate(res.x) if w > 1e-12]
    total = sum(w for w, _ in atoms)
    return merge_atoms([(w / total, I) for w, I in atoms], n)


class _Exchange:
    """Independence test for swapping one element in a padded atom.

    Padding elements (index >= n) are free. For partition-based unions the test
    is a count update; otherwise the union oracle is consulted.
    """

    def __init__(self, U: UnionMatroid):
        self.U = U
        self.n = U.n
        pm = _as_partition(U.base)
        if pm is not None:
            self.part = np.asarray(pm.part_of).tolist()
            self.caps = [U.ell * b for b in pm.budgets]
        else:
            self.part = None

    def counts(self, B):
        c = [0] * len(self.caps)
        for e in B:
            if e < self.n:
                c[self.part[e]] += 1
        return c

    def ok(self, B, counts, out, into) -> bool:
        """Is B - out + into independent?"""
        if into >= self.n:
            return True
        if self.part is not None:
            p = self.part[into]
            if out < self.n and self.part[out] == p:
                return True
            return counts[p] + 1 <= self.caps[p]
        real = {e for e in B if e < self.n and e != out}
        real.add(into)
        return self.U.is_independent(real)

    def apply(self, counts, out, into):
        if self.part is None:
            return
        if out < self.n:
            counts[self.part[out]] -= 1
        if into < self.n:
            counts[self.part[into]] += 1


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def swap_round(d: ConvexDecomposition, U: UnionMatroid, seed=0, exchange: _Exchange | None = None) -> frozenset:
    """Merge the atoms pairwise by elementary exchanges into one random set.

    Atoms are padded with free dummy elements to a common size so the
    symmetric exchange property applies; merge order is a left fold, e1 is the
    smallest element of C - B and e2 the first feasible partner by index.
    """
    rng = _rng(seed)
    if not d.atoms:
        return frozenset()
    n = d.n
    size = max(len(I) for _, I in d.atoms)
    ex = exchange or _Exchange(U)

    def pad(I):
        return set(I) | set(range(n, n + size - len(I)))

    beta, C = d.atoms[0][0], pad(d.atoms[0][1])
    cC = ex.counts(C) if ex.part is not None else None
    for lam, I in d.atoms[1:]:
        B = pad(I)
        cB = ex.counts(B) if ex.part is not None else None
        while True:
            diff = C - B
            if not diff:
                break
            e1 = min(diff)
            e2 = None
            for cand in sorted(B - C):
                if ex.ok(C, cC, e1, cand) and ex.ok(B, cB, cand, e1):
                    e2 = cand
                    break
            if e2 is None:
                raise RoundingError(f"no exchange partner for {e1}; atoms {sorted(C)} and {sorted(B)}")
            if rng.random() < beta / (beta + lam):
                B.discard(e2)
                B.add(e1)
                ex.apply(cB, e2, e1)
            else:
                C.discard(e1)
                C.add(e2)
                ex.apply(cC, e1, e2)
        beta += lam
    return frozenset(e for e in C if e < n)


@dataclass
class RoundingReport:
    accepted: bool
    set: frozenset
    witness: list | None
    values: list = field(default_factory=list)
    threshold: float = 0.0


def round_and_certify(y, U: UnionMatroid, objectives_truncated, gamma: float, epsilon: float, seed=0,
                      decomposition: ConvexDecomposition | None = None) -> RoundingReport:
    """One swap-rounding draw, accepted iff every objective reaches (1 - eps) gamma."""
    d = decomposition if decomposition is not None else decompose(y, U)
    S = swap_round(d, U, seed)
    witness = U.union_partition(S)
    if witness is None:
        raise RoundingError(f"rounded set {sorted(S)} is not independent in the union")
    vals = [f(S) for f in objectives_truncated]
    thr = (1 - epsilon) * gamma
    return RoundingReport(bool(min(vals) >= thr - 1e-12), S, witness, vals, thr)


def marginals(draws, n: int) -> np.ndarray:
    """Empirical inclusion frequencies from a list of sets."""
    counts = np.zeros(n)
    for S in draws:
        counts[list(S)] += 1
    return counts / max(len(draws), 1)


def step_decomposition(step_atoms, delta: float, scale: float, n: int) -> ConvexDecomposition:
    """Combine per-step decompositions: y = delta * sum_s v_s, divided by ``scale``."""
    atoms = [(delta * w / scale, I) for atoms_s in step_atoms for w, I in atoms_s.atoms]
    total = math.fsum(w for w, _ in atoms)
    return merge_atoms([(w / total, I) for w, I in atoms], n)
