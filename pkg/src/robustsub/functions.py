"""Set functions: value oracles with call metering and the concrete families used
throughout the package (modular, coverage, facility location, perturbed,
truncated, averaged and mixed objectives).

Sets are passed around as ``frozenset`` of integer element indices ``0..n-1``.
Exhaustive routines index subsets by bitmask (bit ``e`` set iff ``e`` in S).
"""

from __future__ import annotations

import csv
import json
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, ParameterError, SizeLimitError

EXACT_TABLE_LIMIT = 20
CHECK_LIMIT = 16
TOL = 1e-9


def as_set(S: Iterable[int], n: int | None = None) -> frozenset:
    """Normalize ``S`` into a frozenset, checking indices against ``n``."""
    out = frozenset(int(e) for e in S)
    if n is not None:
        for e in out:
            if e < 0 or e >= n:
                raise DomainError(f"element {e} outside ground set of size {n}")
    return out


def mask_of(S: Iterable[int]) -> int:
    m = 0
    for e in S:
        m |= 1 << e
    return m


def set_of(mask: int) -> frozenset:
    out = []
    e = 0
    while mask:
        if mask & 1:
            out.append(e)
        mask >>= 1
        e += 1
    return frozenset(out)


def member_mask(S, cands: np.ndarray, n: int) -> np.ndarray:
    """Boolean mask over ``cands``: which indices lie in S."""
    if not S:
        return np.zeros(len(cands), dtype=bool)
    m = np.zeros(n, dtype=bool)
    m[list(S)] = True
    return m[cands]


@lru_cache(maxsize=32)
def subset_bits(n: int) -> np.ndarray:
    """Boolean membership matrix of shape (2**n, n); row m is the bitmask m."""
    if n > EXACT_TABLE_LIMIT:
        raise SizeLimitError(f"exhaustive enumeration refused for n={n} > {EXACT_TABLE_LIMIT}")
    masks = np.arange(1 << n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    bits.setflags(write=False)
    return bits


@dataclass(frozen=True)
class GroundSet:
    n: int
    labels: tuple | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("ground set needs n >= 1")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != self.n:
                raise ParameterError(f"expected {self.n} labels, got {len(self.labels)}")

    def label(self, e: int) -> str:
        return str(self.labels[e]) if self.labels else str(e)


class SetFunction:
    """Value oracle f: 2^V -> R with a thread-safe evaluation counter.

    Subclasses implement ``_value``; ``_values_with`` may be overridden with a
    vectorized version. Wrappers evaluate their inner oracles through the
    public interface so inner counters see every call.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ParameterError("set function needs n >= 1")
        self.n = int(n)
        self._calls = 0
        self._lock = threading.Lock()
        self._table = None

    @property
    def call_count(self) -> int:
        return self._calls

    def _count(self, m: int = 1):
        with self._lock:
            self._calls += m

    def __call__(self, S) -> float:
        self._count()
        return float(self._value(S if isinstance(S, frozenset) else frozenset(S)))

    eval = __call__

    def values_with(self, S, candidates) -> np.ndarray:
        """Return ``[f(S + e) for e in candidates]``; counts one call per candidate."""
        S = S if isinstance(S, frozenset) else frozenset(S)
        cands = np.asarray(candidates, dtype=np.int64)
        if cands.size == 0:
            return np.zeros(0)
        self._count(int(cands.size))
        return np.asarray(self._values_with(S, cands), dtype=float)

    def values_many(self, rows) -> np.ndarray:
        """Values of many sets given as a boolean (m, n) membership matrix; m calls."""
        rows = np.atleast_2d(np.asarray(rows, dtype=bool))
        if rows.shape[1] != self.n:
            raise ParameterError(f"rows must have {self.n} columns")
        self._count(rows.shape[0])
        return np.asarray(self._rows_values(rows), dtype=float)

    def value_table(self) -> np.ndarray:
        """Values on all 2**n subsets indexed by bitmask (cached; n <= 20)."""
        if self._table is None:
            if self.n > EXACT_TABLE_LIMIT:
                raise SizeLimitError(f"value table refused for n={self.n} > {EXACT_TABLE_LIMIT}")
            self._count(1 << self.n)
            table = np.asarray(self._table_values(), dtype=float)
            table.setflags(write=False)
            self._table = table
        return self._table

    def _value(self, S: frozenset) -> float:
        raise NotImplementedError

    def _values_with(self, S: frozenset, cands: np.ndarray):
        return [self._value(S | {int(e)}) for e in cands]

    def _rows_values(self, rows):
        return [self._value(frozenset(np.flatnonzero(row).tolist())) for row in rows]

    def _table_values(self):
        return self._rows_values(subset_bits(self.n))


class LambdaFunction(SetFunction):
    """Wraps an arbitrary Python callable on frozensets."""

    def __init__(self, n: int, fn: Callable[[frozenset], float], name: str = "lambda"):
        super().__init__(n)
        self.fn = fn
        self.name = name

    def _value(self, S):
        return self.fn(S)


class ModularFunction(SetFunction):
    def __init__(self, weights, offset: float = 0.0):
        w = np.asarray(weights, dtype=float)
        super().__init__(w.size)
        self.weights = w
        self.offset = float(offset)

    def _value(self, S):
        return self.offset + float(self.weights[list(S)].sum()) if S else self.offset

    def _values_with(self, S, cands):
        base = self._value(S)
        inside = member_mask(S, cands, self.n)
        return np.where(inside, base, base + self.weights[cands])

    def _rows_values(self, rows):
        return self.offset + rows.astype(float) @ self.weights

    def _table_values(self):
        return self._rows_values(subset_bits(self.n))


class CoverageFunction(SetFunction):
    """Weighted coverage: element e covers the items in row ``cover[e]``."""

    def __init__(self, cover, weights=None):
        cover = np.asarray(cover, dtype=bool)
        if cover.ndim != 2:
            raise ParameterError("cover must be an n x m boolean matrix")
        super().__init__(cover.shape[0])
        self.cover = cover
        self.weights = np.ones(cover.shape[1]) if weights is None else np.asarray(weights, dtype=float)
        if self.weights.shape != (cover.shape[1],) or (self.weights < 0).any():
            raise ParameterError("coverage weights must be nonnegative, one per item")

    def _covered(self, S):
        if not S:
            return np.zeros(self.cover.shape[1], dtype=bool)
        return self.cover[list(S)].any(axis=0)

    def _value(self, S):
        return float(self.weights[self._covered(S)].sum())

    def _values_with(self, S, cands):
        covered = self._covered(S)
        base = float(self.weights[covered].sum())
        return base + (self.cover[cands] & ~covered) @ self.weights

    def _rows_values(self, rows):
        covered = (rows.astype(np.int32) @ self.cover.astype(np.int32)) > 0
        return covered @ self.weights

    def _table_values(self):
        return self._rows_values(subset_bits(self.n))

    @classmethod
    def random(cls, n: int, items: int, p: float, rng, weights=None):
        rng = np.random.default_rng(rng)
        cover = rng.random((n, items)) < p
        if weights == "random":
            weights = rng.random(items)
        return cls(cover, weights)


class FacilityLocationFunction(SetFunction):
    """f(A) = 1/(r_max |U|) * sum_u max_{e in A} ratings[u, e]; f(empty) = 0."""

    def __init__(self, ratings, r_max: float = 5.0):
        r = np.asarray(ratings, dtype=float)
        if r.ndim != 2:
            raise ParameterError("ratings must be a |U| x n matrix")
        if (r < 0).any() or (r > r_max).any():
            raise ParameterError(f"ratings must lie in [0, {r_max}]")
        super().__init__(r.shape[1])
        self.ratings = r
        self.r_max = float(r_max)
        self._norm = 1.0 / (self.r_max * r.shape[0])

    def _best(self, S):
        if not S:
            return np.zeros(self.ratings.shape[0])
        return self.ratings[:, list(S)].max(axis=1)

    def _value(self, S):
        return float(self._best(S).sum()) * self._norm

    def _values_with(self, S, cands):
        best = self._best(S)
        return np.maximum(self.ratings[:, cands], best[:, None]).sum(axis=0) * self._norm

    def _rows_values(self, rows):
        out = np.empty(rows.shape[0])
        chunk = max(1, 4_000_000 // (self.ratings.size or 1))
        for a in range(0, rows.shape[0], chunk):
            r = rows[a:a + chunk]
            best = np.where(r[:, None, :], self.ratings[None, :, :], 0.0).max(axis=2)
            out[a:a + chunk] = best.sum(axis=1)
        return out * self._norm

    def _table_values(self):
        if (1 << self.n) * self.ratings.shape[0] > 20_000_000:
            return super()._table_values()
        out = np.zeros(1 << self.n)
        best = np.zeros((1 << self.n, self.ratings.shape[0]))
        for m in range(1, 1 << self.n):
            low = (m & -m).bit_length() - 1
            best[m] = np.maximum(best[m & (m - 1)], self.ratings[:, low])
            out[m] = best[m].sum()
        return out * self._norm


class PerturbedFunction(SetFunction):
    """f(A) + scale * sum_{e in A ∩ support} xi_e (a modular perturbation of ``base``)."""

    def __init__(self, base: SetFunction, support, xi, scale: float):
        super().__init__(base.n)
        self.base = base
        self.support = as_set(support, base.n)
        self.xi = np.asarray(xi, dtype=float)
        self.scale = float(scale)
        self._bonus = np.zeros(base.n)
        idx = sorted(self.support)
        self._bonus[idx] = self.scale * self.xi[idx]

    def _value(self, S):
        return self.base(S) + (float(self._bonus[list(S)].sum()) if S else 0.0)

    def _values_with(self, S, cands):
        idx = list(S)
        extra = float(self._bonus[idx].sum()) if S else 0.0
        inside = np.zeros(self.n, dtype=bool)
        inside[idx] = True
        return self.base.values_with(S, cands) + extra + np.where(inside[cands], 0.0, self._bonus[cands])

    def _rows_values(self, rows):
        return self.base.values_many(rows) + rows.astype(float) @ self._bonus

    def _table_values(self):
        return self.base.value_table() + subset_bits(self.n).astype(float) @ self._bonus


def perturbed_family(base: SetFunction, k: int, lambda_size: int, noise_scale=None, seed=0):
    """k perturbed copies of ``base`` sharing one frozen noise vector xi ~ U[0,1]^n.

    Each member gets its own random support of size ``lambda_size``.
    ``noise_scale`` defaults to 1/n.
    """
    n = base.n
    if k < 1 or not 0 <= lambda_size <= n:
        raise ParameterError("need k >= 1 and 0 <= lambda_size <= n")
    scale = 1.0 / n if noise_scale is None else float(noise_scale)
    rng = np.random.default_rng(seed)
    xi = rng.random(n)
    return [
        PerturbedFunction(base, rng.choice(n, size=lambda_size, replace=False).tolist(), xi, scale)
        for _ in range(k)
    ]


class TruncatedFunction(SetFunction):
    """min{inner(S), gamma}."""

    def __init__(self, inner: SetFunction, gamma: float):
        if not gamma > 0:
            raise ParameterError("truncation level must be positive")
        super().__init__(inner.n)
        self.inner = inner
        self.gamma = float(gamma)

    def _value(self, S):
        return min(self.inner(S), self.gamma)

    def _values_with(self, S, cands):
        return np.minimum(self.inner.values_with(S, cands), self.gamma)

    def _rows_values(self, rows):
        return np.minimum(self.inner.values_many(rows), self.gamma)

    def _table_values(self):
        return np.minimum(self.inner.value_table(), self.gamma)


class RobustAverage(SetFunction):
    """g(S) = (1/k) sum_i min{f_i(S), gamma}."""

    def __init__(self, objectives: Sequence[SetFunction], gamma: float):
        if not objectives:
            raise ParameterError("need at least one objective")
        if not gamma > 0:
            raise ParameterError("gamma must be positive")
        super().__init__(objectives[0].n)
        self.objectives = list(objectives)
        self.gamma = float(gamma)

    def _value(self, S):
        return sum(min(f(S), self.gamma) for f in self.objectives) / len(self.objectives)

    def _values_with(self, S, cands):
        acc = np.zeros(cands.size)
        for f in self.objectives:
            acc += np.minimum(f.values_with(S, cands), self.gamma)
        return acc / len(self.objectives)

    def _rows_values(self, rows):
        return np.mean([np.minimum(f.values_many(rows), self.gamma) for f in self.objectives], axis=0)

    def _table_values(self):
        return np.mean([np.minimum(f.value_table(), self.gamma) for f in self.objectives], axis=0)


def build_robust_average(objectives: Sequence[SetFunction], gamma: float) -> RobustAverage:
    return RobustAverage(objectives, gamma)


class MixtureFunction(SetFunction):
    """Convex combination sum_i q_i f_i. Zero-weight members are never evaluated."""

    def __init__(self, objectives: Sequence[SetFunction], q):
        q = np.asarray(q, dtype=float)
        if len(objectives) == 0 or q.shape != (len(objectives),):
            raise ParameterError("need one weight per objective")
        if (q < 0).any() or abs(q.sum() - 1.0) > 1e-9:
            raise ParameterError(f"mixture weights must be a probability vector, got {q.tolist()}")
        super().__init__(objectives[0].n)
        self.objectives = list(objectives)
        self.q = q
        self._active = [(float(w), f) for w, f in zip(q, objectives) if w > 0]

    def _value(self, S):
        return sum(w * f(S) for w, f in self._active)

    def _values_with(self, S, cands):
        acc = np.zeros(cands.size)
        for w, f in self._active:
            acc += w * f.values_with(S, cands)
        return acc

    def _rows_values(self, rows):
        return sum(w * f.values_many(rows) for w, f in self._active)

    def _table_values(self):
        return sum(w * f.value_table() for w, f in self._active)


def mix(q, objectives: Sequence[SetFunction]) -> MixtureFunction:
    return MixtureFunction(objectives, q)


class ScaledFunction(SetFunction):
    def __init__(self, inner: SetFunction, factor: float):
        if factor < 0:
            raise ParameterError("scale factor must be nonnegative")
        super().__init__(inner.n)
        self.inner = inner
        self.factor = float(factor)

    def _value(self, S):
        return self.factor * self.inner(S)

    def _values_with(self, S, cands):
        return self.factor * self.inner.values_with(S, cands)

    def _rows_values(self, rows):
        return self.factor * self.inner.values_many(rows)

    def _table_values(self):
        return self.factor * self.inner.value_table()


def marginal(f: SetFunction, A, e: int, base_value: float | None = None) -> float:
    """f(A + e) - f(A); pass ``base_value`` = f(A) to save one oracle call."""
    if not 0 <= e < f.n:
        raise DomainError(f"element {e} outside ground set of size {f.n}")
    A = as_set(A, f.n)
    fa = f(A) if base_value is None else base_value
    return f(A | {e}) - fa


@dataclass
class PropertyReport:
    submodular: bool
    monotone: bool
    counterexample: dict | None = None

    @property
    def ok(self) -> bool:
        return self.submodular and self.monotone


def check_submodular_monotone(f: SetFunction, ground: GroundSet | None = None, tol: float = TOL) -> PropertyReport:
    """Exhaustively test monotonicity and diminishing returns (n <= 16).

    Uses the local forms f(A) <= f(A+e) and f_A(e) >= f_{A+e'}(e), which are
    equivalent to the global definitions.
    """
    n = f.n if ground is None else ground.n
    if n > CHECK_LIMIT:
        raise SizeLimitError(f"exhaustive property check refused for n={n} > {CHECK_LIMIT}")
    t = f.value_table()
    masks = np.arange(1 << n)
    monotone = True
    submodular = True
    counter = None
    for e in range(n):
        be = 1 << e
        A = masks[(masks & be) == 0]
        gain = t[A | be] - t[A]
        bad = np.flatnonzero(gain < -tol)
        if bad.size and monotone:
            monotone = False
            a = int(A[bad[0]])
            counter = counter or {
                "kind": "monotone",
                "A": sorted(set_of(a)),
                "B": sorted(set_of(a | be)),
                "f(A)": float(t[a]),
                "f(B)": float(t[a | be]),
            }
        if not submodular:
            continue
        for e2 in range(n):
            if e2 == e:
                continue
            b2 = 1 << e2
            A2 = A[(A & b2) == 0]
            g_small = t[A2 | be] - t[A2]
            g_big = t[A2 | b2 | be] - t[A2 | b2]
            bad = np.flatnonzero(g_small < g_big - tol)
            if bad.size:
                submodular = False
                a = int(A2[bad[0]])
                counter = {
                    "kind": "submodular",
                    "A": sorted(set_of(a)),
                    "B": sorted(set_of(a | b2)),
                    "e": e,
                    "gain_A": float(g_small[bad[0]]),
                    "gain_B": float(g_big[bad[0]]),
                }
                break
    return PropertyReport(submodular, monotone, counter)


@dataclass
class RobustInstance:
    """k objectives over one ground set plus a constraint and an accuracy target."""

    objectives: list
    constraint: object
    epsilon: float = 0.1
    ground: GroundSet | None = None
    vertices: list | None = field(default=None)

    def __post_init__(self):
        if not self.objectives:
            raise ParameterError("need at least one objective")
        n = self.objectives[0].n
        if any(f.n != n for f in self.objectives):
            raise ParameterError("objectives must share one ground set")
        if self.ground is None:
            self.ground = GroundSet(n)
        elif self.ground.n != n:
            raise ParameterError("ground set size does not match objectives")
        if not 0 < self.epsilon < 1:
            raise ParameterError("epsilon must lie in (0, 1)")

    @property
    def n(self) -> int:
        return self.ground.n

    @property
    def k(self) -> int:
        return len(self.objectives)


def load_ratings_csv(path):
    """Read a ratings matrix: header row of element labels, one row per user."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParameterError(f"{path}: empty ratings file")
    labels = [c.strip() for c in rows[0]]
    try:
        data = np.array([[float(c) for c in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise ParameterError(f"{path}: non-numeric rating ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(labels):
        raise ParameterError(f"{path}: rows must have {len(labels)} columns")
    return data, labels


@dataclass(frozen=True)
class PerturbedFamilySpec:
    k: int
    lambda_size: int
    noise_scale: float | None = None
    seed: int = 0

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        try:
            return cls(int(doc["k"]), int(doc["lambda_size"]), doc.get("noise_scale"), int(doc.get("seed", 0)))
        except KeyError as exc:
            raise ParameterError(f"perturbed family spec missing {exc}") from None

    def build(self, base: SetFunction):
        return perturbed_family(base, self.k, self.lambda_size, self.noise_scale, self.seed)
