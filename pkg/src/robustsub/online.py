"""Online max-min submodular maximization: follow-the-perturbed-leader, the
soft-min online ascent, adversary schedules and (1-eps)-regret accounting."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .functions import EXACT_TABLE_LIMIT, ScaledFunction, SetFunction, perturbed_family
from .matroids import Matroid, UnionMatroid, max_weight_independent_set
from .multilinear import EstimatorConfig, exact_batch
from .offline import BRUTE_FORCE_GENERAL_LIMIT, extended_greedy, feasible_table
from .rounding import _Exchange, decompose, swap_round
from .softmin import delta_H

ROUND_DRAWS = 32
RANGE_TOL = 1e-12


# ---------------------------------------------------------------- FPL

class FPLInstance:
    """Follow-the-perturbed-leader over a linear decision set.

    ``q`` is drawn once from U[0, 1/eta]^n (eta = inf gives q = 0). In adaptive
    mode a fresh q is drawn before every decision.
    """

    def __init__(self, eta: float, n: int, seed=0, adaptive: bool = False, q=None):
        if not eta > 0:
            raise ParameterError("eta must be positive")
        self.eta = float(eta)
        self.n = int(n)
        self.adaptive = adaptive
        self.rng = np.random.default_rng(seed)
        self.q = self._draw() if q is None else np.asarray(q, dtype=float)
        self.cumulative = np.zeros(self.n)
        self.rounds = 0

    def _draw(self):
        if math.isinf(self.eta):
            return np.zeros(self.n)
        return self.rng.uniform(0.0, 1.0 / self.eta, self.n)

    def scores(self) -> np.ndarray:
        if self.adaptive and self.rounds > 0:
            self.q = self._draw()
        return self.cumulative + self.q

    def update(self, s):
        self.cumulative += np.asarray(s, dtype=float)
        self.rounds += 1


def linear_argmax(oracle, w) -> np.ndarray:
    """argmax_d w.d over a matroid polytope, an explicit decision matrix, or a callable."""
    w = np.asarray(w, dtype=float)
    if isinstance(oracle, Matroid):
        z = np.zeros(oracle.n)
        z[list(max_weight_independent_set(oracle, w))] = 1.0
        return z
    if callable(oracle):
        return np.asarray(oracle(w), dtype=float)
    D = np.asarray(oracle, dtype=float)
    return D[int(np.argmax(D @ w))]


def fpl_step(inst: FPLInstance, oracle) -> np.ndarray:
    """d_t = argmax_d (sum_{j<t} s_j + q) . d."""
    return linear_argmax(oracle, inst.scores())


@dataclass
class FPLConstants:
    L: float
    A: float
    D: float

    def eta(self, T: int) -> float:
        return math.sqrt(self.D / (self.L * self.A * T))

    def bound(self, eta: float, T: int) -> float:
        return eta * self.L * self.A * T + self.D / eta


def measure_constants(rewards, decisions) -> FPLConstants:
    """L = max |d.s|, A = max ||s||_1, D = max ||d - d'||_1 over the given sets."""
    R = np.asarray(rewards, dtype=float)
    Dm = np.asarray(decisions, dtype=float)
    L = float(np.abs(R @ Dm.T).max())
    A = float(np.abs(R).sum(axis=1).max())
    D = float(np.abs(Dm[:, None, :] - Dm[None, :, :]).sum(axis=2).max())
    return FPLConstants(L, A, D)


def fpl_regret(rewards, decisions, eta: float, draws: int = 100, seed=0) -> np.ndarray:
    """Regret of FPL against the best fixed decision, one value per perturbation draw.

    Vectorized over rounds: decision t uses the prefix sum of rounds < t.
    """
    R = np.asarray(rewards, dtype=float)
    Dm = np.asarray(decisions, dtype=float)
    T, n = R.shape
    prefix = np.vstack([np.zeros(n), np.cumsum(R, axis=0)[:-1]])
    best = float((R.sum(axis=0) @ Dm.T).max())
    rng = np.random.default_rng(seed)
    gain = R @ Dm.T  # (T, |D|)
    out = np.empty(draws)
    for r in range(draws):
        q = rng.uniform(0.0, 1.0 / eta, n)
        pick = np.argmax((prefix + q) @ Dm.T, axis=1)
        out[r] = best - gain[np.arange(T), pick].sum()
    return out


# ---------------------------------------------------------------- schedules

@dataclass
class OnlineSchedule:
    """Rounds of objective collections {f_i^t}, fixed before play."""

    rounds: list
    name: str = "custom"

    def __post_init__(self):
        if not self.rounds:
            raise ParameterError("schedule needs at least one round")
        self.rounds = [list(r) for r in self.rounds]
        n = self.rounds[0][0].n
        if any(f.n != n for r in self.rounds for f in r) or any(not r for r in self.rounds):
            raise ParameterError("every round needs objectives over one ground set")
        self.n = n

    @property
    def T(self) -> int:
        return len(self.rounds)

    def distinct(self):
        seen = {}
        for r in self.rounds:
            for f in r:
                seen.setdefault(id(f), f)
        return list(seen.values())

    def validate(self):
        """Reject values outside [0, 1]; tables are checked when n <= 16, else f(empty) and f(V)."""
        for f in self.distinct():
            if self.n <= BRUTE_FORCE_GENERAL_LIMIT:
                tab = f.value_table()
                lo, hi = float(tab.min()), float(tab.max())
            else:
                lo, hi = f(frozenset()), f(frozenset(range(self.n)))
            if lo < -RANGE_TOL or hi > 1 + RANGE_TOL:
                raise ParameterError(f"schedule values must lie in [0, 1]; found range [{lo:.6g}, {hi:.6g}]")
        return self


def stationary(objectives, T: int) -> OnlineSchedule:
    return OnlineSchedule([list(objectives)] * T, "stationary")


def switching(first, second, T: int, switch_times) -> OnlineSchedule:
    """Play ``first`` until the first switch time, then alternate at each listed time."""
    times = sorted(int(s) for s in switch_times)
    rounds, cur, which = [], list(first), 0
    for t in range(T):
        while times and t >= times[0]:
            times.pop(0)
            which ^= 1
            cur = list(second) if which else list(first)
        rounds.append(cur)
    return OnlineSchedule(rounds, "switching")


def normalized(objectives):
    """Rescale a family into [0, 1] by the largest f_i(V) (monotone objectives)."""
    n = objectives[0].n
    top = max(f(frozenset(range(n))) for f in objectives)
    return [ScaledFunction(f, 1.0 / top) if top > 0 else f for f in objectives]


def drifting(n: int, k: int, T: int, seed=0, period: int = 50, num_users: int = 30,
             lambda_size: int | None = None, noise_scale=None) -> OnlineSchedule:
    """Perturbed facility-location families, redrawn every ``period`` rounds, scaled into [0, 1]."""
    from .functions import FacilityLocationFunction
    from .harness import ExperimentConfig, generate_synthetic_ratings

    if period < 1:
        raise ParameterError("period must be >= 1")
    cfg = ExperimentConfig(n=n, num_users=num_users, k=k, q=1, b=1, lambda_size=0, trials=1,
                           seed=int(np.random.default_rng(seed).integers(2**31)), sparsity=0.3, genres=3)
    base = FacilityLocationFunction(generate_synthetic_ratings(cfg))
    lam = max(1, n // 4) if lambda_size is None else lambda_size
    rounds, blocks = [], {}
    for t in range(T):
        p = t // period
        if p not in blocks:
            blocks[p] = normalized(perturbed_family(base, k, lam, noise_scale, [seed, p]))
        rounds.append(blocks[p])
    return OnlineSchedule(rounds, "drifting")


# ---------------------------------------------------------------- regret

@dataclass
class RegretReport:
    per_round_payoffs: list
    hindsight_value: float
    hindsight_set: list
    regret_curve: list
    hindsight_curve: list
    epsilon: float
    exact: bool = True

    def recompute(self) -> np.ndarray:
        pay = np.cumsum(self.per_round_payoffs)
        return (1 - self.epsilon) * np.asarray(self.hindsight_curve) - pay

    def regret(self, t: int) -> float:
        return float(self.regret_curve[t - 1])

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "exact_hindsight": self.exact,
            "hindsight_value": self.hindsight_value,
            "hindsight_set": self.hindsight_set,
            "per_round_payoffs": [float(p) for p in self.per_round_payoffs],
            "regret_curve": [float(r) for r in self.regret_curve],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def write_csv(self, path):
        pay = np.cumsum(self.per_round_payoffs)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "regret", "cumulative_payoff", "hindsight_prefix", "average_regret"])
            for t, (r, c, h) in enumerate(zip(self.regret_curve, pay, self.hindsight_curve), start=1):
                w.writerow([t, repr(float(r)), repr(float(c)), repr(float(h)), repr(float(r) / t)])


def _round_mins(schedule: OnlineSchedule, masks):
    cache = {}
    for r in schedule.rounds:
        key = tuple(id(f) for f in r)
        if key not in cache:
            cache[key] = np.min([f.value_table()[masks] for f in r], axis=0)
        yield cache[key]


def regret_1_minus_eps(schedule: OnlineSchedule, payoffs, epsilon: float, M) -> RegretReport:
    """(1-eps) max_{S in I} sum_t min_i f_i^t(S) - sum_t payoff_t, for every prefix.

    Exhaustive for n <= 16; otherwise the benchmark is the value of a greedy
    set on the summed objectives, a lower bound (flagged exact=False).
    """
    payoffs = np.asarray(payoffs, dtype=float)
    if payoffs.size != schedule.T:
        raise ParameterError(f"{payoffs.size} payoffs for {schedule.T} rounds")
    n = schedule.n
    if n <= BRUTE_FORCE_GENERAL_LIMIT:
        masks = feasible_table(M, n)
        running = np.zeros(masks.size)
        curve = np.empty(schedule.T)
        for t, mins in enumerate(_round_mins(schedule, masks)):
            running += mins
            curve[t] = running.max()
        best = int(masks[int(np.argmax(running))])
        best_set = [e for e in range(n) if best >> e & 1]
        exact = True
    else:
        from .functions import LambdaFunction

        total = LambdaFunction(n, lambda S: sum(min(f(S) for f in r) for r in schedule.rounds), "hindsight-sum")
        S = extended_greedy(total, M, 1).union
        per = np.array([min(f(S) for f in r) for r in schedule.rounds])
        curve = np.cumsum(per)
        best_set, exact = sorted(S), False
    regret = (1 - epsilon) * curve - np.cumsum(payoffs)
    return RegretReport(payoffs.tolist(), float(curve[-1]), best_set, regret.tolist(), curve.tolist(), epsilon, exact)


# ---------------------------------------------------------------- soft-min ascent

@dataclass
class OnlineParams:
    ell: int
    delta: float
    steps: int
    alpha: float
    eta: float

    @classmethod
    def resolve(cls, n: int, k: int, T: int, epsilon: float, M, eta=None, alpha=None, delta=None,
                literal_params: bool = False):
        if not 0 < epsilon < 1:
            raise ParameterError("epsilon must lie in (0, 1)")
        ell = max(1, math.ceil(math.log(1 / epsilon)))
        if literal_params:
            alpha = float(n * n * T * T) if alpha is None else alpha
            delta = float(n) ** -6 * float(T) ** -3 if delta is None else delta
        alpha = 4.0 * max(math.log(k), 1.0) * max(n, T) if alpha is None else float(alpha)
        delta = ell / 64 if delta is None else float(delta)
        if not (0 < delta <= ell):
            raise ParameterError("delta must lie in (0, ell]")
        steps = max(1, round(ell / delta))
        if eta is None:
            D = 2.0 * M.rank(range(n))
            eta = math.sqrt(max(D, 1.0) / (n * n * T))
        return cls(ell, ell / steps, steps, float(alpha), float(eta))


@dataclass
class OnlineResult:
    played: list
    witnesses: list
    payoffs: list
    per_objective: list
    report: RegretReport
    params: OnlineParams
    max_l1: float
    max_dot: float
    transcript: list = field(default_factory=list)
    wall_time_s: float = 0.0

    def write_transcript(self, path):
        with open(path, "w") as fh:
            for rec in self.transcript:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def online_softmin_run(schedule: OnlineSchedule, M, epsilon: float, eta=None, alpha=None, delta=None,
                       cfg: EstimatorConfig | None = None, seed=0, literal_params: bool = False,
                       draws: int = ROUND_DRAWS, adaptive: bool = False, exact: bool | None = None,
                       hindsight: bool = True) -> OnlineResult:
    """Soft-min online ascent with one FPL learner per grid time, all sharing q."""
    schedule.validate()
    t0 = time.perf_counter()
    n, T = schedule.n, schedule.T
    k = max(len(r) for r in schedule.rounds)
    prm = OnlineParams.resolve(n, k, T, epsilon, M, eta, alpha, delta, literal_params)
    if exact is None:
        exact = n <= EXACT_TABLE_LIMIT
    U = UnionMatroid(M, prm.ell)
    ex = _Exchange(U)
    rng = np.random.default_rng(seed)
    fpl = FPLInstance(prm.eta, n, rng, adaptive)
    acc = np.zeros((prm.steps, n))
    played, witnesses, payoffs, per_obj, transcript = [], [], [], [], []
    max_l1 = max_dot = 0.0
    for t in range(T):
        if adaptive and t > 0:
            fpl.q = fpl._draw()
        y = np.zeros(n)
        Y = np.empty((prm.steps, n))
        Z = np.empty((prm.steps, n))
        for s in range(prm.steps):
            Z[s] = linear_argmax(M, acc[s] + fpl.q)
            Y[s] = y
            y = y + prm.delta * (1.0 - y) * Z[s]
        y = np.clip(y, 0.0, 1.0)
        d = decompose(y, U)
        draw_rng = np.random.default_rng([int(rng.integers(2**63)), t])
        sets = [swap_round(d, U, draw_rng, ex) for _ in range(max(1, draws))]
        S = sets[0]
        wit = U.union_partition(S)
        if wit is None or len(wit) > prm.ell or not all(M.is_independent(L) for L in wit):
            raise RuntimeError(f"round {t + 1}: played set lacks a valid witness")
        objs = schedule.rounds[t]
        vals = np.array([[f(X) for f in objs] for X in sets])
        mean_vals = vals.mean(axis=0)
        payoff = float(mean_vals.min())
        # reveal round t and feed every grid learner
        if exact:
            F, G = exact_batch([f.value_table() for f in objs], Y)
            W = np.exp(-prm.alpha * (F - F.min(axis=1, keepdims=True)))
            W /= W.sum(axis=1, keepdims=True)
            dH = (1.0 - Y) * np.einsum("mk,mkn->mn", W, G)
        else:
            base = cfg or EstimatorConfig()
            dH = np.array([delta_H(Y[s], objs, prm.alpha, EstimatorConfig(base.samples, [base.seed, t, s]))
                           for s in range(prm.steps)])
        l1 = float(np.abs(dH).sum(axis=1).max())
        dot = float(np.abs((Z * dH).sum(axis=1)).max())
        if l1 > n + 1e-9 or dot > n + 1e-9:
            raise RuntimeError(f"round {t + 1}: reward bound violated (l1={l1:.4g}, dot={dot:.4g})")
        max_l1, max_dot = max(max_l1, l1), max(max_dot, dot)
        acc += dH
        played.append(S)
        witnesses.append(wit)
        payoffs.append(payoff)
        per_obj.append(mean_vals.tolist())
        transcript.append({
            "t": t + 1,
            "S_t": sorted(S),
            "witness": [sorted(L) for L in wit],
            "payoff_min": payoff,
            "per_objective_payoffs": mean_vals.tolist(),
            "grid_stats": {"max_l1": l1, "max_dot": dot, "y_final_sum": float(y.sum())},
        })
    report = regret_1_minus_eps(schedule, payoffs, epsilon, M) if hindsight else None
    return OnlineResult(played, witnesses, payoffs, per_obj, report, prm, max_l1, max_dot, transcript,
                        time.perf_counter() - t0)
