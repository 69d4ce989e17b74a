"""Multilinear extension F(y) = E_{S~y}[f(S)] of a set function: exact
evaluation from the value table (n <= 20) and Monte-Carlo estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError, SizeLimitError
from .functions import EXACT_TABLE_LIMIT, SetFunction, subset_bits

CLAMP_TOL = 1e-12


def fractional_point(y, n: int | None = None) -> np.ndarray:
    """Validate y in [0,1]^n, clamping arithmetic drift up to 1e-12."""
    y = np.asarray(y, dtype=float).copy()
    if y.ndim != 1 or (n is not None and y.size != n):
        raise ParameterError(f"expected a vector of length {n}")
    if (y < -CLAMP_TOL).any() or (y > 1 + CLAMP_TOL).any() or not np.isfinite(y).all():
        raise ParameterError("fractional point must lie in [0,1]^n")
    return np.clip(y, 0.0, 1.0)


@dataclass(frozen=True)
class EstimatorConfig:
    samples: int | None = None
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if self.samples is not None and self.samples < 1:
            raise ParameterError("samples must be >= 1")

    def count(self, n: int, per: int = 64) -> int:
        return self.samples if self.samples is not None else per * n


def _factors(y):
    bits = subset_bits(y.size)
    return np.where(bits, y[None, :], 1.0 - y[None, :])


def subset_probabilities(y) -> np.ndarray:
    """P[S_y = S] for every bitmask S."""
    y = fractional_point(y)
    return _factors(y).prod(axis=1)


def _check_exact(f: SetFunction):
    if f.n > EXACT_TABLE_LIMIT:
        raise SizeLimitError(f"exact multilinear evaluation refused for n={f.n} > {EXACT_TABLE_LIMIT}")


def multilinear_exact(f: SetFunction, y) -> float:
    """sum_S f(S) prod_{e in S} y_e prod_{e not in S} (1 - y_e), compensated summation."""
    _check_exact(f)
    y = fractional_point(y, f.n)
    return math.fsum((f.value_table() * subset_probabilities(y)).tolist())


def _table_gradient(table: np.ndarray, y: np.ndarray) -> np.ndarray:
    # d p(S)/d y_e = +-prod_{j != e} factor_j; the product excluding e comes
    # from prefix and suffix cumulative products.
    n = y.size
    bits = subset_bits(n)
    fac = _factors(y)
    ones = np.ones((fac.shape[0], 1))
    prefix = np.cumprod(np.hstack([ones, fac[:, :-1]]), axis=1)
    suffix = np.cumprod(np.hstack([ones, fac[:, :0:-1]]), axis=1)[:, ::-1]
    signed = np.where(bits, 1.0, -1.0) * prefix * suffix
    return table @ signed


def multilinear_gradient_exact(f: SetFunction, y) -> np.ndarray:
    """dF/dy_e = E_{S~y}[f(S+e) - f(S-e)], exact."""
    _check_exact(f)
    return _table_gradient(f.value_table(), fractional_point(y, f.n))


def sample_sets(y, samples: int, seed=0, antithetic: bool = False) -> np.ndarray:
    """Boolean matrix (samples x n); row s is the indicator of S_s ~ y.

    All uniforms come from one generator seeded by ``seed``, so the draw does
    not depend on how callers split the rows among workers.
    """
    y = fractional_point(y)
    rng = np.random.default_rng(seed)
    if antithetic:
        half = (samples + 1) // 2
        u = rng.random((half, y.size))
        u = np.vstack([u, 1.0 - u])[:samples]
    else:
        u = rng.random((samples, y.size))
    return u < y[None, :]


def _mean_and_error(x: np.ndarray, antithetic: bool):
    x = np.asarray(x, dtype=float)
    if antithetic and x.size >= 2:
        half = (x.size + 1) // 2
        pairs = x[: x.size - half]
        x = 0.5 * (x[:half][: pairs.size] + pairs) if pairs.size else x
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def multilinear_estimate(f: SetFunction, y, cfg: EstimatorConfig | None = None):
    """Sample-mean estimate of F(y) and its standard error."""
    cfg = cfg or EstimatorConfig()
    y = fractional_point(y, f.n)
    rows = sample_sets(y, cfg.count(f.n), cfg.seed, cfg.antithetic)
    vals = f.values_many(rows)
    mean, err = _mean_and_error(vals, cfg.antithetic)
    if np.all((y == 0) | (y == 1)):
        err = 0.0
    return mean, err


def delta_e(f: SetFunction, y, e: int, cfg: EstimatorConfig | None = None, exact: bool = False) -> float:
    """Delta_e F(y) = E_{S~y}[f(S+e) - f(S)] = (1 - y_e) dF/dy_e."""
    if not 0 <= e < f.n:
        raise DomainError(f"element {e} outside ground set of size {f.n}")
    y = fractional_point(y, f.n)
    if exact:
        return float((1.0 - y[e]) * multilinear_gradient_exact(f, y)[e])
    cfg = cfg or EstimatorConfig()
    rows = sample_sets(y, cfg.count(f.n, 32), cfg.seed, cfg.antithetic)
    diffs = []
    for r in rows:
        S = frozenset(np.flatnonzero(r).tolist())
        diffs.append(0.0 if e in S else f.values_with(S, [e])[0] - f(S))
    return _mean_and_error(np.array(diffs), cfg.antithetic)[0]


def delta_vector(f: SetFunction, y, cfg: EstimatorConfig | None = None, exact: bool = False):
    """All Delta_e F(y) at once; Monte-Carlo mode reuses each sampled set for every e.

    Returns (deltas, standard errors); errors are zero in exact mode.
    """
    y = fractional_point(y, f.n)
    if exact:
        return (1.0 - y) * multilinear_gradient_exact(f, y), np.zeros(f.n)
    cfg = cfg or EstimatorConfig()
    _, deltas, errs, _ = estimate_objectives([f], y, cfg)
    return deltas[0], errs[0]


def estimate_objectives(objectives, y, cfg: EstimatorConfig | None = None, per: int = 32):
    """Common-random-set estimates for k objectives at one point.

    Returns (F values (k,), Delta matrix (k, n), Delta standard errors (k, n),
    F standard errors (k,)).
    The same sampled sets serve every objective and every element.
    """
    cfg = cfg or EstimatorConfig()
    n = objectives[0].n
    y = fractional_point(y, n)
    rows = sample_sets(y, cfg.count(n, per), cfg.seed, cfg.antithetic)
    k = len(objectives)
    vals = np.zeros((k, rows.shape[0]))
    diffs = np.zeros((k, rows.shape[0], n))
    everything = np.arange(n)
    for s, r in enumerate(rows):
        S = frozenset(np.flatnonzero(r).tolist())
        out = everything[~r]
        for i, f in enumerate(objectives):
            base = f(S)
            vals[i, s] = base
            if out.size:
                diffs[i, s, out] = f.values_with(S, out) - base
    F = vals.mean(axis=1)
    D = diffs.mean(axis=1)
    m = rows.shape[0]
    if m > 1:
        E = diffs.std(axis=1, ddof=1) / math.sqrt(m)
        FE = vals.std(axis=1, ddof=1) / math.sqrt(m)
    else:
        E, FE = np.zeros((k, n)), np.zeros(k)
    return F, D, E, FE


def exact_objectives(objectives, y):
    """Exact (F values, gradients) for k objectives at y."""
    y = fractional_point(y, objectives[0].n)
    F = np.array([multilinear_exact(f, y) for f in objectives])
    G = np.array([multilinear_gradient_exact(f, y) for f in objectives])
    return F, G


def exact_batch(tables, Y):
    """F and gradients for several value tables at several points.

    ``tables`` is (k, 2^n), ``Y`` is (m, n); returns F (m, k) and G (m, k, n).
    Uses plain (pairwise) summation, unlike ``multilinear_exact``.
    """
    tables = np.atleast_2d(np.asarray(tables, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = Y.shape[1]
    bits = subset_bits(n)
    fac = np.where(bits[None, :, :], Y[:, None, :], 1.0 - Y[:, None, :])
    m, N, _ = fac.shape
    ones = np.ones((m, N, 1))
    prefix = np.cumprod(np.concatenate([ones, fac[:, :, :-1]], axis=2), axis=2)
    suffix = np.cumprod(np.concatenate([ones, fac[:, :, :0:-1]], axis=2), axis=2)[:, :, ::-1]
    excl = prefix * suffix
    P = excl[:, :, 0] * fac[:, :, 0]
    F = P @ tables.T
    signed = np.where(bits[None, :, :], 1.0, -1.0) * excl
    G = np.einsum("ks,msn->mkn", tables, signed)
    return F, G
