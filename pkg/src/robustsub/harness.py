"""Synthetic recommendation instances and the partition-constrained experiment."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ParameterError
from .functions import FacilityLocationFunction, RobustInstance, perturbed_family
from .matroids import PartitionMatroid
from .offline import layers_for_matroid, robust_offline_solve

# Scale of the original movie-recommendation study, kept for reference only.
REFERENCE_DEFAULTS = {
    "n": 1000, "num_users": 1000, "k": 20, "q": 10, "b": 5,
    "lambda_size": 100, "epsilon": 0.01, "trials": 20,
}


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 200
    num_users: int = 200
    k: int = 5
    q: int = 5
    b: int = 3
    lambda_size: int = 20
    noise_scale: float | None = None
    epsilon: float = 0.01
    trials: int = 20
    seed: int = 0
    sparsity: float = 0.1
    genres: int = 10
    search: str = "binary"

    def __post_init__(self):
        if min(self.n, self.num_users, self.k, self.q, self.b, self.trials) < 1:
            raise ParameterError("sizes, k, q, b and trials must be positive")
        if self.q * self.b > self.n:
            raise ParameterError(f"q*b = {self.q * self.b} exceeds n = {self.n}")
        if self.q > self.n:
            raise ParameterError("more parts than elements")
        if not 0 <= self.lambda_size <= self.n:
            raise ParameterError("lambda_size must lie in [0, n]")
        if not 0 < self.epsilon < 1:
            raise ParameterError("epsilon must lie in (0, 1)")
        if not 0 <= self.sparsity <= 1:
            raise ParameterError("sparsity is a fraction in [0, 1]")
        if self.genres < 1:
            raise ParameterError("need at least one genre")

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ParameterError(f"unknown config keys: {sorted(extra)}")
        return cls(**doc)

    @property
    def ell(self) -> int:
        return layers_for_matroid(self.k, self.epsilon)


def generate_synthetic_ratings(cfg: ExperimentConfig, seed=None) -> np.ndarray:
    """|U| x n ratings in {0,...,5}.

    Each item has one genre and each user one to three favourite genres. An
    entry is rated with probability ``sparsity``; rated entries draw from
    {3,4,5} for a favourite genre and {1,2,3} otherwise.
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    U, n = cfg.num_users, cfg.n
    genre = rng.integers(cfg.genres, size=n)
    fav = np.zeros((U, cfg.genres), dtype=bool)
    for u in range(U):
        fav[u, rng.choice(cfg.genres, size=min(cfg.genres, rng.integers(1, 4)), replace=False)] = True
    rated = rng.random((U, n)) < cfg.sparsity
    likes = fav[:, genre]
    value = np.where(likes, rng.integers(3, 6, size=(U, n)), rng.integers(1, 4, size=(U, n)))
    return np.where(rated, value, 0).astype(float)


def random_partition(n: int, q: int, rng) -> list:
    """Random split of range(n) into q near-equal parts."""
    perm = rng.permutation(n)
    return [sorted(p.tolist()) for p in np.array_split(perm, q)]


@dataclass
class MetricsRecord:
    trial: int
    wall_time_s: float
    oracle_calls: int
    per_part_sizes: list
    union_size: int
    min_objective_value: float
    gamma: float | None
    ell: int
    flags: list = field(default_factory=list)

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_time_s")
        return d


def _trial(cfg: ExperimentConfig, ratings, t: int) -> MetricsRecord:
    rng = np.random.default_rng([cfg.seed, t])
    parts = random_partition(cfg.n, cfg.q, rng)
    base = FacilityLocationFunction(ratings)
    fam = perturbed_family(base, cfg.k, cfg.lambda_size, cfg.noise_scale, int(rng.integers(2**31)))
    M = PartitionMatroid(parts, cfg.b)
    t0 = time.perf_counter()
    sol = robust_offline_solve(RobustInstance(fam, M, cfg.epsilon), search=cfg.search)
    wall = time.perf_counter() - t0
    calls = sum(f.call_count for f in fam)
    sizes = M.counts(sol.union).tolist()
    return MetricsRecord(t, wall, calls, sizes, len(sol.union), sol.min_value, sol.gamma, sol.ell, sol.flags)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list

    def summary(self) -> dict:
        sizes = np.array([r.per_part_sizes for r in self.records], dtype=float)
        calls = np.array([r.oracle_calls for r in self.records], dtype=float)
        wall = np.array([r.wall_time_s for r in self.records])
        per_part = sizes.mean(axis=1)
        return {
            "trials": len(self.records),
            "ell": self.config.ell,
            "part_size_bound": self.config.b * self.config.ell,
            "mean_part_size": float(per_part.mean()),
            "std_part_size": float(per_part.std()),
            "max_part_size": int(sizes.max()),
            "mean_oracle_calls": float(calls.mean()),
            "std_oracle_calls": float(calls.std()),
            "mean_wall_time_s": float(wall.mean()),
            "std_wall_time_s": float(wall.std()),
            "mean_min_value": float(np.mean([r.min_objective_value for r in self.records])),
        }

    def to_dict(self, timing: bool = True) -> dict:
        s = self.summary()
        if not timing:
            s = {k: v for k, v in s.items() if "wall_time" not in k}
        return {
            "config": asdict(self.config),
            "records": [r.to_dict(timing) for r in self.records],
            "summary": s,
        }

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True, indent=2)


def run_experiment(cfg: ExperimentConfig, workers: int = 1, ratings=None) -> ExperimentResult:
    """One robust solve per trial, each on a fresh random partition and perturbed family."""
    ratings = generate_synthetic_ratings(cfg) if ratings is None else np.asarray(ratings, dtype=float)
    if ratings.shape[1] != cfg.n:
        raise ParameterError(f"ratings have {ratings.shape[1]} items, config says n={cfg.n}")
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(lambda t: _trial(cfg, ratings, t), range(cfg.trials)))
    else:
        records = [_trial(cfg, ratings, t) for t in range(cfg.trials)]
    records.sort(key=lambda r: r.trial)
    return ExperimentResult(cfg, records)


def reference_scale_figures() -> dict:
    """Figures reported for the original dataset (not reproduced here)."""
    return {"mean_part_size": 14.90, "part_size_bound": 60, "cpu_seconds": 21.67, "oracle_calls": 42.79e4,
            "config": dict(REFERENCE_DEFAULTS)}


def ratio_bound(cfg: ExperimentConfig) -> float:
    return cfg.b * math.ceil(math.log2(2 * cfg.k / cfg.epsilon))
