"""Continuous greedy on truncated objectives: direction LP, discretized ascent,
the gamma decision procedure, and the robust solver built on it."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import GammaTooLarge, ParameterError
from .functions import RobustInstance, TruncatedFunction
from .matroids import PartitionMatroid, UniformMatroid, UnionMatroid
from .multilinear import EstimatorConfig, estimate_objectives, exact_objectives
from .offline import BiCriteriaSolution, _calls, _greedy_upper_bound, gamma_candidates, robust_offline_solve
from .rounding import ConvexDecomposition, decompose, round_and_certify, step_decomposition, waterfill

EXACT_DEFAULT_LIMIT = 12
LP_TOL = 1e-9


def continuous_layers(k: int, epsilon: float, c: float = 0.5) -> int:
    """ceil(ln(k/eps) + ln(1/c))."""
    if not 0 < epsilon < 1 or not 0 < c < 1:
        raise ParameterError("epsilon and c must lie in (0, 1)")
    return max(1, math.ceil(math.log(k / epsilon) + math.log(1 / c)))


def _partition_of(M):
    if isinstance(M, UniformMatroid):
        return M.as_partition()
    if isinstance(M, PartitionMatroid):
        return M
    raise ParameterError("continuous greedy supports uniform and partition matroids only")


def find_direction(y, F, grads, gamma: float, M, slack=None):
    """A direction v with grads_i . v >= gamma - F_i - slack_i, v in P(M), y + v <= 1.

    Solved as max t s.t. grads_i . v - t >= gamma - F_i - slack_i; the largest
    margin direction is returned. Raises GammaTooLarge when t* < 0.
    """
    pm = _partition_of(M)
    y = np.asarray(y, dtype=float)
    grads = np.atleast_2d(np.asarray(grads, dtype=float))
    F = np.atleast_1d(np.asarray(F, dtype=float))
    k, n = grads.shape
    need = gamma - F - (np.zeros(k) if slack is None else np.asarray(slack, dtype=float))
    # variables (v_1..v_n, t); minimize -t
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = [np.concatenate([-grads, np.ones((k, 1))], axis=1)]
    b_ub = [-need]
    P = np.zeros((len(pm.parts), n + 1))
    for j, part in enumerate(pm.parts):
        P[j, list(part)] = 1.0
    A_ub.append(P)
    b_ub.append(np.asarray(pm.budgets, dtype=float))
    bounds = [(0.0, max(0.0, 1.0 - ye)) for ye in y] + [(None, 1.0)]
    res = linprog(c, A_ub=np.vstack(A_ub), b_ub=np.concatenate(b_ub), bounds=bounds, method="highs")
    if res.status != 0:
        raise GammaTooLarge(f"direction LP failed: {res.message}")
    t = -res.fun
    scale = max(1.0, abs(gamma))
    if t < -LP_TOL * scale:
        raise GammaTooLarge(f"no direction reaches gamma={gamma:.6g} (margin {t:.3g})")
    v = np.clip(res.x[:n], 0.0, None)
    v = np.minimum(v, 1.0 - y)
    return v


@dataclass
class AscentTrace:
    delta: float
    gamma: float
    ell: int
    grid: list = field(default_factory=list)
    points: list = field(default_factory=list)
    directions: list = field(default_factory=list)
    step_atoms: list = field(default_factory=list)
    F_values: list = field(default_factory=list)
    exact: bool = True
    n: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.points[-1]

    def claim_gaps(self, tol_factor: float = 2.0) -> np.ndarray:
        """min_i F_i(y(tau)) - [(1 - e^-tau) gamma - tol_factor tau delta gamma] per grid time."""
        out = []
        for tau, Fv in zip(self.grid, self.F_values):
            ref = (1 - math.exp(-tau)) * self.gamma - tol_factor * tau * self.delta * self.gamma
            out.append(min(Fv) - ref)
        return np.array(out)

    def claim_holds(self, tol_factor: float = 2.0) -> bool:
        return bool((self.claim_gaps(tol_factor) >= -1e-12).all())

    def decomposition_at(self, step: int) -> ConvexDecomposition:
        """Certificate y(tau)/tau in P(M) from the stored step atoms (step >= 1)."""
        tau = step * self.delta
        return step_decomposition(self.step_atoms[:step], self.delta, tau, self.n)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "gamma": self.gamma,
            "ell": self.ell,
            "exact": self.exact,
            "tau": [float(t) for t in self.grid],
            "F_values": [[float(v) for v in Fv] for Fv in self.F_values],
            "reference": [float((1 - math.exp(-t)) * self.gamma) for t in self.grid],
            "y_final": [float(v) for v in self.final],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _evaluate(truncated, y, exact, cfg, step):
    if exact:
        F, G = exact_objectives(truncated, y)
        return F, G, None
    cfg = cfg or EstimatorConfig()
    sub = EstimatorConfig(cfg.samples, [cfg.seed, step], cfg.antithetic)
    F, D, E, FE = estimate_objectives(truncated, y, sub)
    room = 1.0 - y
    safe = room > 1e-9
    G = np.where(safe[None, :], D / np.where(safe, room, 1.0)[None, :], 0.0)
    Gerr = np.where(safe[None, :], E / np.where(safe, room, 1.0)[None, :], 0.0)
    return F, G, (FE, Gerr)


def continuous_greedy_run(objectives, gamma: float, epsilon: float, M, delta: float = 0.01, c: float = 0.5,
                          exact: bool | None = None, cfg: EstimatorConfig | None = None,
                          ell: int | None = None, truncate: bool = True) -> AscentTrace:
    """Discretized ascent y <- y + delta v(y) on the truncated objectives up to time ell."""
    if not gamma > 0:
        raise ParameterError("gamma must be positive")
    pm = _partition_of(M)
    n = objectives[0].n
    ell = continuous_layers(len(objectives), epsilon, c) if ell is None else int(ell)
    steps = round(ell / delta)
    if steps < 1 or abs(steps * delta - ell) > 1e-9 * max(1, ell):
        raise ParameterError(f"step {delta} must divide the horizon {ell}")
    if exact is None:
        exact = n <= EXACT_DEFAULT_LIMIT
    truncated = [TruncatedFunction(f, gamma) for f in objectives] if truncate else list(objectives)
    rank = float(sum(min(b, len(p)) for p, b in zip(pm.parts, pm.budgets)))
    y = np.zeros(n)
    trace = AscentTrace(delta, gamma, ell, exact=exact, n=n)
    for s in range(steps + 1):
        F, G, err = _evaluate(truncated, y, exact, cfg, s)
        trace.grid.append(s * delta)
        trace.points.append(y.copy())
        trace.F_values.append(F.tolist())
        if s == steps:
            break
        slack = None
        if err is not None:
            FE, Gerr = err
            slack = 3.0 * (FE + Gerr.max(axis=1) * rank)
        v = find_direction(y, F, G, gamma, M, slack)
        trace.directions.append(v)
        trace.step_atoms.append(waterfill(v, pm.parts, pm.budgets))
        y = np.minimum(y + delta * v, 1.0)
    return trace


@dataclass
class DecisionResult:
    accepted: bool
    set: frozenset | None
    witness: list | None
    values: list
    gamma: float
    ell: int
    attempts: int
    reason: str = ""
    trace: AscentTrace | None = None


def decision_solve(objectives, gamma: float, epsilon: float, M, delta: float = 0.01, c: float = 0.5,
                   repetitions: int = 20, seed=0, exact: bool | None = None,
                   cfg: EstimatorConfig | None = None) -> DecisionResult:
    """Accept with a set S (union of <= ell independent sets) where all f_i(S) >= (1-eps) gamma, or reject."""
    ell = continuous_layers(len(objectives), epsilon, c)
    if gamma <= 0:
        return DecisionResult(True, frozenset(), [frozenset()] * ell, [f(frozenset()) for f in objectives],
                              gamma, ell, 0, "vacuous")
    try:
        trace = continuous_greedy_run(objectives, gamma, epsilon, M, delta, c, exact, cfg, ell)
    except GammaTooLarge as exc:
        return DecisionResult(False, None, None, [], gamma, ell, 0, f"gamma too large: {exc}")
    U = UnionMatroid(M, ell)
    d = decompose(trace.final, U)
    truncated = [TruncatedFunction(f, gamma) for f in objectives]
    rng = np.random.default_rng(seed)
    last = None
    for r in range(repetitions):
        rep = round_and_certify(trace.final, U, truncated, gamma, epsilon, rng, decomposition=d)
        last = rep
        if rep.accepted:
            vals = [f(rep.set) for f in objectives]
            return DecisionResult(True, rep.set, rep.witness, vals, gamma, ell, r + 1, "accepted", trace)
    vals = [f(last.set) for f in objectives] if last else []
    return DecisionResult(False, last.set if last else None, last.witness if last else None, vals, gamma, ell,
                          repetitions, "all rounding draws below threshold", trace)


def robust_continuous_solve(instance: RobustInstance, *, delta: float = 0.01, c: float = 0.5, repetitions: int = 20,
                            seed=0, exact: bool | None = None, cfg: EstimatorConfig | None = None,
                            prune: bool = True) -> BiCriteriaSolution:
    """Sweep gamma candidates in descending order; the first accepted gamma wins."""
    objectives = instance.objectives
    M = instance.constraint
    _partition_of(M)
    eps = instance.epsilon
    t0 = time.perf_counter()
    calls0 = _calls(objectives)
    ell = continuous_layers(len(objectives), eps, c)
    cands = gamma_candidates(objectives, eps).values
    if prune:
        ub = _greedy_upper_bound(objectives, M, 2)
        kept = cands[cands <= ub * (1 + 1e-12)]
        cands = kept if kept.size else cands[-1:]
    rng = np.random.default_rng(seed)
    for gamma in cands.tolist():
        res = decision_solve(objectives, gamma, eps, M, delta, c, repetitions, rng, exact, cfg)
        if res.accepted:
            return BiCriteriaSolution(
                list(res.witness), res.set, res.values, gamma, ell, _calls(objectives) - calls0,
                (time.perf_counter() - t0) * 1e3, flags=[] if gamma > 0 else ["opt-zero"],
            )
    fb = robust_offline_solve(RobustInstance(objectives, M, eps))
    return BiCriteriaSolution(
        fb.layers, fb.union, fb.values, fb.gamma, fb.ell, _calls(objectives) - calls0,
        (time.perf_counter() - t0) * 1e3, flags=fb.flags + ["continuous-fallback"],
    )
