"""Offline bi-criteria algorithms: extended greedy, the robust reduction with a
search over the target value gamma, bang-per-buck for knapsacks, greedy over
matroid intersections, the distributionally robust reduction, and the
exhaustive optimum used as a test oracle."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ParameterError, SizeLimitError
from .functions import RobustAverage, RobustInstance, SetFunction, build_robust_average, member_mask, mix
from .matroids import Intersection, KnapsackConstraint, Matroid, as_constraint, enumerate_feasible

BRUTE_FORCE_LIMIT = 20
BRUTE_FORCE_GENERAL_LIMIT = 16
CERT_SLACK = 1e-12


@dataclass
class BiCriteriaSolution:
    layers: list
    union: frozenset
    values: list
    gamma: float | None
    ell: int
    oracle_calls: int
    wall_time_ms: float = 0.0
    layer_costs: list | None = None
    union_cost: float | None = None
    flags: list = field(default_factory=list)

    @property
    def min_value(self) -> float:
        return min(self.values) if self.values else 0.0

    def to_dict(self) -> dict:
        d = {
            "layers": [sorted(S) for S in self.layers],
            "union": sorted(self.union),
            "per_objective_values": [float(v) for v in self.values],
            "min_value": float(self.min_value),
            "gamma": self.gamma,
            "ell": self.ell,
            "oracle_calls": self.oracle_calls,
            "wall_time_ms": self.wall_time_ms,
        }
        if self.layer_costs is not None:
            d["layer_costs"] = [float(c) for c in self.layer_costs]
            d["union_cost"] = float(self.union_cost)
        if self.flags:
            d["flags"] = list(self.flags)
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _calls(objectives) -> int:
    return sum(f.call_count for f in objectives)


def _layered_greedy(f: SetFunction, constraint, ell: int):
    """Core loop shared by extended greedy and its intersection variant.

    Round tau grows S_tau from empty until no element can be added, each time
    taking argmax_e f(U + e) where U is the union so far (ties: lowest index).
    Subtracting f(empty) would not change any argmax, so no shift is applied.
    Once no candidate has positive gain the round stops calling the oracle and
    pads S_tau to a basis, taking members of U first so the union grows only
    when it must. Padded elements have zero gain (submodularity and
    monotonicity), so f(U) is unchanged.
    """
    if ell < 1:
        raise ParameterError("ell must be >= 1")
    n = f.n
    union = frozenset()
    union_val = f(union)
    in_union = np.zeros(n, dtype=bool)
    layers = []
    everything = np.arange(n)
    for _ in range(ell):
        layer = frozenset()
        in_layer = np.zeros(n, dtype=bool)
        while True:
            outside = everything[~in_layer]
            cands = outside[constraint.can_add(layer, outside)]
            if cands.size == 0:
                break
            vals = np.full(cands.size, union_val)
            fresh = ~in_union[cands]
            if fresh.any():
                vals[fresh] = f.values_with(union, cands[fresh])
            best = int(np.argmax(vals))
            if vals[best] <= union_val:
                break
            e = int(cands[best])
            layer = layer | {e}
            in_layer[e] = True
            if not in_union[e]:
                union = union | {e}
                in_union[e] = True
                union_val = float(vals[best])
        for pool in (np.flatnonzero(in_union & ~in_layer), np.flatnonzero(~in_union & ~in_layer)):
            for e in pool.tolist():
                if constraint.can_add(layer, [e])[0]:
                    layer = layer | {e}
                    in_layer[e] = True
        union = union | layer
        in_union |= in_layer
        layers.append(layer)
    return layers, union


def extended_greedy(f: SetFunction, M, ell: int) -> BiCriteriaSolution:
    """l rounds of matroid greedy, each scored against the running union.

    Guarantee for monotone submodular f: f(union) >= (1 - 2^-l) max_{S in I} f(S).
    """
    t0 = time.perf_counter()
    calls0 = f.call_count
    layers, union = _layered_greedy(f, as_constraint(M), ell)
    value = f(union)
    return BiCriteriaSolution(
        layers, union, [value], None, ell, f.call_count - calls0, (time.perf_counter() - t0) * 1e3
    )


def extended_greedy_intersection(f: SetFunction, matroids, ell: int) -> BiCriteriaSolution:
    """Extended greedy where each layer must be independent in all r matroids.

    Guarantee: f(union) >= (1 - (r/(r+1))^l) OPT.
    """
    matroids = list(matroids)
    if not matroids:
        raise ParameterError("need r >= 1 matroids")
    return extended_greedy(f, matroids[0] if len(matroids) == 1 else Intersection(matroids), ell)


def layers_for_matroid(k: int, epsilon: float) -> int:
    return max(1, math.ceil(math.log2(2 * k / epsilon)))


def layers_for_intersection(k: int, epsilon: float, r: int) -> int:
    return max(1, math.ceil(math.log2(2 * k / epsilon) / math.log2((r + 1) / r)))


def layers_for_knapsack(k: int, epsilon: float) -> int:
    return max(1, math.ceil(math.log(2 * k / epsilon)))


@dataclass
class GammaCandidates:
    """Target values n * f_i(e) * (1 - eps/2)^j, deduplicated and sorted descending."""

    values: np.ndarray
    epsilon: float
    max_exponent: int
    singletons: np.ndarray

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values.tolist())

    def bisect(self, certified):
        """Binary search for the largest candidate accepted by ``certified``.

        Keeps a bracket (accepted, rejected) of adjacent candidates; the result
        is exact when acceptance is monotone and otherwise still sits directly
        below a rejected (hence > OPT) candidate. Returns (index, outcome) or
        (None, None) if even the smallest candidate is rejected.
        """
        asc = self.values[::-1]
        seen = {}

        def probe(i):
            if i not in seen:
                seen[i] = certified(float(asc[i]))
            return seen[i]

        top = len(asc) - 1
        if probe(top)[0]:
            return len(self.values) - 1 - top, seen[top][1]
        if not probe(0)[0]:
            return None, None
        lo, hi = 0, top
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if probe(mid)[0]:
                lo = mid
            else:
                hi = mid
        return len(self.values) - 1 - lo, seen[lo][1]


def gamma_candidates(objectives, epsilon: float, n: int | None = None) -> GammaCandidates:
    if not 0 < epsilon < 1:
        raise ParameterError("epsilon must lie in (0, 1)")
    if not objectives:
        raise ParameterError("need at least one objective")
    n = objectives[0].n if n is None else n
    single = np.array([[f(frozenset([e])) for e in range(n)] for f in objectives])
    J = max(0, math.ceil(math.log(1.0 / n) / math.log(1 - epsilon / 2)))
    base = n * single[single > 0]
    if base.size == 0:
        return GammaCandidates(np.array([0.0]), epsilon, J, single)
    powers = (1 - epsilon / 2) ** np.arange(J + 1)
    vals = np.unique((base[:, None] * powers[None, :]).ravel())[::-1]
    return GammaCandidates(vals.copy(), epsilon, J, single)


def _certify(objectives, union, gamma, epsilon):
    vals = [f(union) for f in objectives]
    return min(vals) >= (1 - epsilon / 2) * gamma - CERT_SLACK, vals


def _search_gamma(objectives, epsilon, run_layers, ell, search, upper=None):
    """Shared gamma search for the g-reduction (matroid, intersection, knapsack).

    ``run_layers(g)`` returns (layers, union). ``upper``, a proven upper bound
    on OPT, removes larger candidates before either search mode runs.
    """
    cands = gamma_candidates(objectives, epsilon)
    flags = []
    if cands.values[0] == 0.0:
        g = build_robust_average(objectives, 1.0)
        layers, union = run_layers(g)
        return layers, union, [f(union) for f in objectives], 0.0, ["opt-zero"]
    best = None

    def attempt(gamma):
        nonlocal best
        layers, union = run_layers(build_robust_average(objectives, gamma))
        ok, vals = _certify(objectives, union, gamma, epsilon)
        out = (layers, union, vals, gamma)
        if best is None or min(vals) > min(best[2]):
            best = out
        return ok, out

    if upper is not None:
        kept = cands.values[cands.values <= upper * (1 + 1e-12)]
        cands.values = kept if kept.size else cands.values[-1:]
    if search == "binary":
        idx, out = cands.bisect(attempt)
        if out is not None:
            return (*out, flags)
    elif search == "descending":
        for gamma in cands.values.tolist():
            ok, out = attempt(gamma)
            if ok:
                return (*out, flags)
    else:
        raise ParameterError(f"unknown search mode {search!r}")
    flags.append("uncertified")
    return (*best, flags)


def _greedy_upper_bound(objectives, constraint, factor: float) -> float:
    """OPT <= min_i (factor * f_i(G_i) - (factor - 1) f_i(empty)), G_i the plain greedy set."""
    ub = math.inf
    for f in objectives:
        layers, union = _layered_greedy(f, constraint, 1)
        ub = min(ub, factor * f(union) - (factor - 1) * f(frozenset()))
    return ub


def _finish(objectives, layers, union, vals, gamma, ell, calls0, t0, flags, **extra):
    return BiCriteriaSolution(
        layers, union, vals, gamma, ell, _calls(objectives) - calls0,
        (time.perf_counter() - t0) * 1e3, flags=flags, **extra,
    )


def robust_offline_solve(instance: RobustInstance, *, search: str = "descending", ell: int | None = None, prune: bool = True) -> BiCriteriaSolution:
    """Bi-criteria max-min over a matroid (or a list of matroids).

    Runs extended greedy on g(S) = mean_i min{f_i(S), gamma} for gamma
    candidates, accepting the first gamma with min_i f_i(union) >= (1-eps/2) gamma.
    """
    objectives = instance.objectives
    eps = instance.epsilon
    constraint = as_constraint(instance.constraint)
    if isinstance(constraint, KnapsackConstraint):
        return robust_knapsack_solve(instance, search=search, ell=ell)
    r = len(constraint.matroids) if isinstance(constraint, Intersection) else 1
    if ell is None:
        ell = layers_for_matroid(len(objectives), eps) if r == 1 else layers_for_intersection(len(objectives), eps, r)
    t0 = time.perf_counter()
    calls0 = _calls(objectives)
    if len(objectives) == 1:
        f = objectives[0]
        layers, union = _layered_greedy(f, constraint, ell)
        return _finish(objectives, layers, union, [f(union)], None, ell, calls0, t0, ["single-objective"])
    upper = _greedy_upper_bound(objectives, constraint, r + 1) if prune else None
    layers, union, vals, gamma, flags = _search_gamma(
        objectives, eps, lambda g: _layered_greedy(g, constraint, ell), ell, search, upper
    )
    return _finish(objectives, layers, union, vals, gamma, ell, calls0, t0, flags)


def robust_intersection_solve(objectives, matroids, epsilon, **kw) -> BiCriteriaSolution:
    return robust_offline_solve(RobustInstance(list(objectives), list(matroids), epsilon), **kw)


def _bang_per_buck_layers(g: SetFunction, K: KnapsackConstraint, ell: int):
    """Each round scans the pool by gain/cost; e* joins the layer if the layer
    stays within twice the capacity, and leaves the pool either way. The pool
    resets every round. Elements costlier than the capacity never enter it.
    A round ends early once the best ratio is <= 0; later picks could not
    change g.
    """
    if ell < 1:
        raise ParameterError("ell must be >= 1")
    limit = 2 * K.capacity + 1e-12
    union = frozenset()
    layers = []
    eligible = np.flatnonzero(K.costs <= K.capacity + 1e-12)
    union_val = g(union)
    for _ in range(ell):
        layer = frozenset()
        layer_cost = 0.0
        pool = eligible.copy()
        while pool.size:
            vals = np.full(pool.size, union_val)
            fresh = ~member_mask(union, pool, g.n)
            if fresh.any():
                vals[fresh] = g.values_with(union, pool[fresh])
            ratio = (vals - union_val) / K.costs[pool]
            best = int(np.argmax(ratio))
            if ratio[best] <= 0:
                break
            e = int(pool[best])
            if layer_cost + K.costs[e] <= limit:
                layer = layer | {e}
                layer_cost += K.costs[e]
                union = union | {e}
                union_val = float(vals[best])
            pool = np.delete(pool, best)
        layers.append(layer)
    return layers, union


def extended_bang_per_buck(g: SetFunction, K: KnapsackConstraint, ell: int) -> BiCriteriaSolution:
    """Guarantee: g(union) >= (1 - e^-l) max_{S in K} g(S); each layer costs <= 2."""
    t0 = time.perf_counter()
    calls0 = g.call_count
    layers, union = _bang_per_buck_layers(g, K, ell)
    return BiCriteriaSolution(
        layers, union, [g(union)], None, ell, g.call_count - calls0, (time.perf_counter() - t0) * 1e3,
        layer_costs=[K.cost(S) for S in layers], union_cost=K.cost(union),
    )


def robust_knapsack_solve(instance: RobustInstance, *, search: str = "descending", ell: int | None = None) -> BiCriteriaSolution:
    objectives = instance.objectives
    K = instance.constraint
    eps = instance.epsilon
    ell = layers_for_knapsack(len(objectives), eps) if ell is None else ell
    t0 = time.perf_counter()
    calls0 = _calls(objectives)
    if len(objectives) == 1:
        f = objectives[0]
        layers, union = _bang_per_buck_layers(f, K, ell)
        vals, gamma, flags = [f(union)], None, ["single-objective"]
    else:
        layers, union, vals, gamma, flags = _search_gamma(
            objectives, eps, lambda g: _bang_per_buck_layers(g, K, ell), ell, search
        )
    return _finish(
        objectives, layers, union, vals, gamma, ell, calls0, t0, flags,
        layer_costs=[K.cost(S) for S in layers], union_cost=K.cost(union),
    )


def distributionally_robust_solve(objectives, vertices, M, epsilon: float, **kw) -> BiCriteriaSolution:
    """max_S min_{q in Vert(Q)} f_q(S) via the robust reduction on the mixtures."""
    vertices = [np.asarray(q, dtype=float) for q in vertices]
    if not vertices:
        raise ParameterError("need at least one vertex")
    mixtures = [mix(q, objectives) for q in vertices]
    calls0 = _calls(objectives)
    sol = robust_offline_solve(RobustInstance(mixtures, M, epsilon), **kw)
    sol.oracle_calls = _calls(objectives) - calls0
    sol.flags = list(sol.flags) + ["distributionally-robust"]
    return sol


def brute_force_opt(objectives, constraint=None, n: int | None = None):
    """Exact max over feasible S of min_i f_i(S); ties -> lexicographically smallest S.

    ``constraint`` None means every subset is feasible (n <= 16); downward-closed
    constraints are enumerated by depth-first search (n <= 20).
    """
    if not objectives:
        raise ParameterError("need at least one objective")
    n = objectives[0].n if n is None else n
    if constraint is None:
        if n > BRUTE_FORCE_GENERAL_LIMIT:
            raise SizeLimitError(f"brute force refused for n={n} > {BRUTE_FORCE_GENERAL_LIMIT}")
        from .matroids import UniformMatroid

        constraint = UniformMatroid(n, n)
    elif n > BRUTE_FORCE_LIMIT:
        raise SizeLimitError(f"brute force refused for n={n} > {BRUTE_FORCE_LIMIT}")
    best_val, best_set = -math.inf, None
    use_tables = n <= 16
    tables = [f.value_table() for f in objectives] if use_tables else None
    for S in enumerate_feasible(constraint):
        if use_tables:
            m = 0
            for e in S:
                m |= 1 << e
            v = min(t[m] for t in tables)
        else:
            v = min(f(S) for f in objectives)
        if v > best_val:
            best_val, best_set = float(v), S
    return best_val, best_set


def feasible_table(constraint, n: int):
    """Bitmasks of every feasible set (used by exhaustive regret benchmarks)."""
    masks = []
    for S in enumerate_feasible(constraint):
        m = 0
        for e in S:
            m |= 1 << e
        masks.append(m)
    return np.asarray(masks, dtype=np.int64)
