"""Matroids given by independence oracles, the l-fold matroid union, the
intersection of several matroids, and the knapsack constraint."""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np

from .errors import MatroidAxiomError, ParameterError, SizeLimitError
from .functions import as_set, mask_of, member_mask

EXPLICIT_LIMIT = 12
RANK_FORMULA_LIMIT = 20


class Matroid:
    """Base class: subclasses provide ``is_independent``."""

    def __init__(self, n: int):
        if n < 1:
            raise ParameterError("matroid needs n >= 1")
        self.n = int(n)

    def is_independent(self, S) -> bool:
        raise NotImplementedError

    def can_add(self, S, candidates) -> np.ndarray:
        """Boolean mask: which candidates e (not in S) keep S + e independent."""
        S = frozenset(S)
        return np.array([e not in S and self.is_independent(S | {int(e)}) for e in candidates], dtype=bool)

    def rank(self, S=None) -> int:
        S = range(self.n) if S is None else sorted(as_set(S, self.n))
        indep = frozenset()
        for e in S:
            if self.is_independent(indep | {e}):
                indep = indep | {e}
        return len(indep)

    def is_basis(self, S) -> bool:
        S = frozenset(S)
        if not self.is_independent(S):
            return False
        rest = [e for e in range(self.n) if e not in S]
        return not self.can_add(S, rest).any()

    def max_weight_independent_set(self, w) -> frozenset:
        return max_weight_independent_set(self, w)

    def independent_sets(self, limit: int = RANK_FORMULA_LIMIT):
        """All independent sets, in lexicographic order of sorted tuples."""
        if self.n > limit:
            raise SizeLimitError(f"enumeration of independent sets refused for n={self.n} > {limit}")
        return list(enumerate_feasible(self))


class UniformMatroid(Matroid):
    def __init__(self, n: int, b: int):
        super().__init__(n)
        if b < 0:
            raise ParameterError("budget must be nonnegative")
        self.b = int(b)

    def is_independent(self, S):
        return len(frozenset(S)) <= self.b

    def can_add(self, S, candidates):
        S = frozenset(S)
        cands = np.asarray(candidates, dtype=np.int64)
        ok = len(S) < self.b
        return np.array([ok and int(e) not in S for e in cands], dtype=bool)

    def as_partition(self):
        return PartitionMatroid([list(range(self.n))], [self.b])

    def __repr__(self):
        return f"UniformMatroid(n={self.n}, b={self.b})"


class PartitionMatroid(Matroid):
    """S independent iff |S ∩ P_j| <= b_j for every part."""

    def __init__(self, parts, budgets):
        parts = [sorted(int(e) for e in p) for p in parts]
        if isinstance(budgets, (int, np.integer)):
            budgets = [int(budgets)] * len(parts)
        budgets = [int(b) for b in budgets]
        if len(parts) != len(budgets):
            raise ParameterError("need one budget per part")
        if any(b < 0 for b in budgets):
            raise ParameterError("budgets must be nonnegative")
        flat = [e for p in parts for e in p]
        n = len(flat)
        if n == 0 or sorted(flat) != list(range(n)):
            raise ParameterError("parts must be disjoint and cover 0..n-1")
        super().__init__(n)
        self.parts = parts
        self.budgets = budgets
        self.part_of = np.empty(n, dtype=np.int64)
        for j, p in enumerate(parts):
            self.part_of[p] = j
        self._budget_arr = np.asarray(budgets, dtype=np.int64)

    def counts(self, S) -> np.ndarray:
        return np.bincount(self.part_of[list(S)], minlength=len(self.parts)) if S else np.zeros(len(self.parts), dtype=np.int64)

    def is_independent(self, S):
        return bool((self.counts(S) <= self._budget_arr).all())

    def can_add(self, S, candidates):
        S = frozenset(S)
        cands = np.asarray(candidates, dtype=np.int64)
        if cands.size == 0:
            return np.zeros(0, dtype=bool)
        room = self.counts(S) < self._budget_arr
        inside = member_mask(S, cands, self.n)
        return room[self.part_of[cands]] & ~inside

    def __repr__(self):
        return f"PartitionMatroid(parts={self.parts}, budgets={self.budgets})"


class ExplicitMatroid(Matroid):
    """Matroid listed by its independent sets; axioms validated on construction (n <= 12).

    The family may be given by its maximal members only; it is closed downward.
    """

    def __init__(self, n: int, independent_sets, close_downward: bool = False, validate: bool = True):
        super().__init__(n)
        if n > EXPLICIT_LIMIT:
            raise SizeLimitError(f"explicit matroid refused for n={n} > {EXPLICIT_LIMIT}")
        family = {as_set(S, n) for S in independent_sets}
        if close_downward:
            closed = set()
            for S in family:
                for r in range(len(S) + 1):
                    closed.update(frozenset(c) for c in itertools.combinations(sorted(S), r))
            family = closed
        self.family = frozenset(family)
        self._masks = {mask_of(S) for S in self.family}
        if validate:
            check_matroid_axioms(self.family, n)

    def is_independent(self, S):
        return mask_of(S) in self._masks

    def __repr__(self):
        return f"ExplicitMatroid(n={self.n}, |I|={len(self.family)})"


def check_matroid_axioms(family, n: int):
    """Raise MatroidAxiomError with a counterexample if ``family`` is not a matroid."""
    family = set(family)
    if frozenset() not in family:
        raise MatroidAxiomError("empty set is not independent", {"axiom": "nonempty"})
    for B in family:
        for e in B:
            if B - {e} not in family:
                raise MatroidAxiomError(
                    "family is not closed downward",
                    {"axiom": "downward", "B": sorted(B), "A": sorted(B - {e})},
                )
    by_size = sorted(family, key=len)
    for A in by_size:
        for B in by_size:
            if len(A) < len(B) and not any(A | {e} in family for e in B - A):
                raise MatroidAxiomError(
                    "exchange property fails",
                    {"axiom": "exchange", "A": sorted(A), "B": sorted(B)},
                )


class Intersection(Matroid):
    """Sets independent in every member matroid (an independence system, not a matroid)."""

    def __init__(self, matroids):
        matroids = list(matroids)
        if not matroids:
            raise ParameterError("need at least one matroid")
        super().__init__(matroids[0].n)
        if any(m.n != self.n for m in matroids):
            raise ParameterError("matroids must share one ground set")
        self.matroids = matroids

    def is_independent(self, S):
        return all(m.is_independent(S) for m in self.matroids)

    def can_add(self, S, candidates):
        cands = np.asarray(candidates, dtype=np.int64)
        ok = np.ones(cands.size, dtype=bool)
        for m in self.matroids:
            ok &= m.can_add(S, cands)
        return ok


class UnionMatroid(Matroid):
    """l-fold union: S independent iff it splits into l independent sets of ``base``."""

    def __init__(self, base: Matroid, ell: int):
        if ell < 1:
            raise ParameterError("fold count must be >= 1")
        super().__init__(base.n)
        self.base = base
        self.ell = int(ell)
        if isinstance(base, UniformMatroid):
            base = base.as_partition()
        self._partition = base if isinstance(base, PartitionMatroid) else None
        if self._partition is not None:
            self._caps = np.asarray(self._partition.budgets, dtype=np.int64) * self.ell

    @property
    def closed_form(self) -> bool:
        return self._partition is not None

    def is_independent(self, S):
        S = frozenset(S)
        if self._partition is not None:
            return bool((self._partition.counts(S) <= self._caps).all())
        if self.ell == 1:
            return self.base.is_independent(S)
        return self.union_partition(S) is not None

    def can_add(self, S, candidates):
        if self._partition is None:
            return super().can_add(S, candidates)
        S = frozenset(S)
        cands = np.asarray(candidates, dtype=np.int64)
        if cands.size == 0:
            return np.zeros(0, dtype=bool)
        room = self._partition.counts(S) < self._caps
        inside = member_mask(S, cands, self.n)
        return room[self._partition.part_of[cands]] & ~inside

    def union_partition(self, S):
        """Split S into ``ell`` base-independent sets, or return None if impossible."""
        S = as_set(S, self.n)
        if self._partition is not None:
            if not self.is_independent(S):
                return None
            layers = [set() for _ in range(self.ell)]
            pm = self._partition
            for j, part in enumerate(pm.parts):
                members = [e for e in part if e in S]
                for i, e in enumerate(members):
                    layers[i // pm.budgets[j]].add(e)
            return [frozenset(x) for x in layers]
        if self.ell == 1:
            return [S] if self.base.is_independent(S) else None
        return matroid_partition(self.base, self.ell, S)

    def __repr__(self):
        return f"UnionMatroid({self.base!r}, ell={self.ell})"


def matroid_partition(base: Matroid, ell: int, S):
    """Edmonds' matroid partitioning by shortest augmenting paths.

    Returns ``ell`` disjoint base-independent sets covering S, or None.
    """
    sets = [set() for _ in range(ell)]
    where = {}
    for s in sorted(S):
        if not _augment(base, sets, where, s):
            return None
    out = [frozenset(x) for x in sets]
    if not all(base.is_independent(x) for x in out):
        raise RuntimeError("matroid partition produced a dependent layer")
    return out


def _augment(base, sets, where, s) -> bool:
    parent = {s: None}
    queue = deque([s])
    while queue:
        x = queue.popleft()
        home = where.get(x)
        for j, layer in enumerate(sets):
            if j != home and base.is_independent(frozenset(layer) | {x}):
                path = [x]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                path.reverse()
                # path[i] moves into the layer of path[i+1]; the last element joins layer j
                moves = [(path[i], where[path[i + 1]]) for i in range(len(path) - 1)]
                moves.append((path[-1], j))
                for y in path:
                    if y in where:
                        sets[where[y]].discard(y)
                for y, dest in moves:
                    sets[dest].add(y)
                    where[y] = dest
                return True
        for j, layer in enumerate(sets):
            if j == home:
                continue
            fl = frozenset(layer)
            for y in sorted(layer):
                if y not in parent and base.is_independent((fl - {y}) | {x}):
                    parent[y] = x
                    queue.append(y)
    return False


def union_is_independent(U: UnionMatroid, S):
    """(True, witness layers) if S is independent in the union matroid, else (False, None)."""
    witness = U.union_partition(S)
    return witness is not None, witness


def union_rank_formula(base: Matroid, ell: int, S) -> int:
    """min_{A ⊆ S} |S \\ A| + ell * rank(A), by exhaustive enumeration (|S| <= 20)."""
    S = sorted(as_set(S, base.n))
    if len(S) > RANK_FORMULA_LIMIT:
        raise SizeLimitError(f"rank formula refused for |S|={len(S)} > {RANK_FORMULA_LIMIT}")
    best = len(S)
    for r in range(len(S) + 1):
        for A in itertools.combinations(S, r):
            best = min(best, len(S) - r + ell * base.rank(A))
    return best


def max_weight_independent_set(M: Matroid, w) -> frozenset:
    """Matroid greedy on strictly positive weights; ties broken by ascending index."""
    w = np.asarray(w, dtype=float)
    if w.shape != (M.n,):
        raise ParameterError(f"expected {M.n} weights")
    if isinstance(M, UniformMatroid):
        M = M.as_partition()
    if isinstance(M, PartitionMatroid):
        # greedy restricted to each part independently gives the same set
        picked = []
        for part, b in zip(M.parts, M.budgets):
            pos = [e for e in part if w[e] > 0]
            pos.sort(key=lambda e: (-w[e], e))
            picked.extend(pos[:b])
        return frozenset(picked)
    order = sorted((e for e in range(M.n) if w[e] > 0), key=lambda e: (-w[e], e))
    S = frozenset()
    for e in order:
        if M.can_add(S, [e])[0]:
            S = S | {e}
    return S


class KnapsackConstraint:
    """S feasible iff sum of costs <= capacity (costs strictly positive)."""

    def __init__(self, costs, capacity: float = 1.0):
        c = np.asarray(costs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ParameterError("costs must be a nonempty vector")
        if (c <= 0).any():
            raise ParameterError("knapsack costs must be strictly positive")
        if not capacity > 0:
            raise ParameterError("capacity must be positive")
        self.costs = c
        self.capacity = float(capacity)
        self.n = c.size

    def cost(self, S) -> float:
        return float(self.costs[list(S)].sum()) if S else 0.0

    def is_feasible(self, S) -> bool:
        return self.cost(S) <= self.capacity + 1e-12

    is_independent = is_feasible

    def can_add(self, S, candidates):
        S = frozenset(S)
        cands = np.asarray(candidates, dtype=np.int64)
        room = self.capacity + 1e-12 - self.cost(S)
        inside = member_mask(S, cands, self.n)
        return (self.costs[cands] <= room) & ~inside

    def __repr__(self):
        return f"KnapsackConstraint(n={self.n}, capacity={self.capacity})"


def as_constraint(constraint):
    """Lists of matroids become an Intersection; everything else passes through."""
    if isinstance(constraint, (list, tuple)):
        return constraint[0] if len(constraint) == 1 else Intersection(constraint)
    return constraint


def enumerate_feasible(constraint):
    """Yield every feasible set of a downward-closed constraint in lexicographic order."""
    constraint = as_constraint(constraint)
    n = constraint.n
    stack = [(frozenset(), -1)]
    while stack:
        S, last = stack.pop()
        yield S
        cands = np.arange(last + 1, n)
        if cands.size == 0:
            continue
        ok = cands[constraint.can_add(S, cands)]
        for e in ok[::-1]:
            stack.append((S | {int(e)}, int(e)))
