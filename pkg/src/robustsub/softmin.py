"""Soft-min H = -(1/alpha) ln sum_i exp(-alpha g_i), its weights and gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .multilinear import EstimatorConfig, estimate_objectives, exact_objectives, fractional_point


@dataclass(frozen=True)
class SoftMinConfig:
    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha)


def _check_alpha(alpha):
    if not (np.isfinite(alpha) and alpha > 0):
        raise ParameterError("alpha must be finite and positive")


def _values(g):
    g = np.asarray(g, dtype=float)
    if g.ndim != 1 or g.size == 0 or not np.isfinite(g).all():
        raise ParameterError("soft-min needs a non-empty vector of finite values")
    return g


def softmin_value(values, alpha: float) -> float:
    """g_min - (1/alpha) ln sum_i exp(-alpha (g_i - g_min))."""
    _check_alpha(alpha)
    g = _values(values)
    lo = g.min()
    return float(lo - math.log(np.exp(-alpha * (g - lo)).sum()) / alpha)


def softmin_weights(values, alpha: float) -> np.ndarray:
    """softmax(-alpha g)."""
    _check_alpha(alpha)
    g = _values(values)
    w = np.exp(-alpha * (g - g.min()))
    return w / w.sum()


def softmin_gradient(grads, p) -> np.ndarray:
    """sum_i p_i grad_i."""
    grads = np.atleast_2d(np.asarray(grads, dtype=float))
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size != grads.shape[0]:
        raise ParameterError(f"{p.size} weights for {grads.shape[0]} gradients")
    if (p < -1e-12).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ParameterError("weights must form a probability vector")
    return p @ grads


def softmin_multilinear(objectives, y, alpha: float):
    """Exact H(y) over multilinear extensions, with its gradient."""
    F, G = exact_objectives(objectives, y)
    p = softmin_weights(F, alpha)
    return softmin_value(F, alpha), softmin_gradient(G, p)


def delta_H(y, objectives, alpha: float, cfg: EstimatorConfig | None = None, exact: bool = False) -> np.ndarray:
    """Delta_e H(y) = sum_i p_i(y) Delta_e F_i(y) = (1 - y_e) dH/dy_e.

    Monte-Carlo mode computes weights and Deltas from one shared pool of sets.
    """
    y = fractional_point(y, objectives[0].n)
    if exact:
        F, G = exact_objectives(objectives, y)
        return (1.0 - y) * softmin_gradient(G, softmin_weights(F, alpha))
    F, D, _, _ = estimate_objectives(objectives, y, cfg or EstimatorConfig())
    return softmin_gradient(D, softmin_weights(F, alpha))


def sandwich_slack(n: int, T: int, k: int, alpha: float) -> float:
    """Upper slack in sum_i p_i g_i <= H + (n + ln T)/alpha + (ln k)/alpha + k e^{-n}/T."""
    return (n + math.log(T)) / alpha + math.log(k) / alpha + k * math.exp(-n) / T
