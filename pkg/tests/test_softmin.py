import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from robustsub import CoverageFunction, ParameterError
from robustsub.multilinear import delta_vector, exact_objectives
from robustsub.softmin import (
    SoftMinConfig,
    delta_H,
    sandwich_slack,
    softmin_gradient,
    softmin_multilinear,
    softmin_value,
    softmin_weights,
)

finite = st.floats(-50, 50, allow_nan=False)


def unit_coverage(n, rng, items=10, p=0.35):
    """Coverage function with total weight 1, so values lie in [0, 1]."""
    cover = rng.random((n, items)) < p
    w = rng.random(items)
    return CoverageFunction(cover, w / w.sum())


def test_single_value_is_identity():
    assert softmin_value([0.37], 5.0) == 0.37
    assert softmin_weights([0.37], 5.0).tolist() == [1.0]


def test_equal_values():
    for k in (2, 3, 7):
        assert softmin_value([0.4] * k, 3.0) == pytest.approx(0.4 - math.log(k) / 3.0, abs=1e-15)
    np.testing.assert_allclose(softmin_weights([1.0, 1.0], 8.0), [0.5, 0.5])


def test_two_value_reference():
    got = softmin_value([0.2, 0.8], 10.0)
    assert got == pytest.approx(-0.1 * math.log(math.exp(-2) + math.exp(-8)), abs=1e-15)
    assert got == pytest.approx(oracles.softmin_hp([0.2, 0.8], 10.0), abs=1e-15)


def test_large_alpha_is_stable():
    p = softmin_weights([0.5, 0.6, 0.9], 1e4)
    assert p[0] >= 1 - 1e-12 and np.isfinite(p).all()
    assert softmin_value([0.5, 0.6], 1e12) == pytest.approx(0.5, abs=1e-12)
    g = [3.0, 3.5, 4.0]
    assert softmin_value(g, 1e6) == pytest.approx(oracles.softmin_hp(g, 1e6, dps=80), abs=1e-12)


def test_validation():
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ParameterError):
            softmin_value([1.0], bad)
        with pytest.raises(ParameterError):
            SoftMinConfig(bad)
    with pytest.raises(ParameterError):
        softmin_value([], 1.0)
    with pytest.raises(ParameterError):
        softmin_value([1.0, math.nan], 1.0)
    with pytest.raises(ParameterError):
        softmin_gradient(np.ones((2, 3)), [1.0])
    with pytest.raises(ParameterError):
        softmin_gradient(np.ones((2, 3)), [0.7, 0.7])


def test_gradient_examples():
    G = np.array([[1.0, 2.0, 0.0]])
    np.testing.assert_array_equal(softmin_gradient(G, [1.0]), G[0])
    same = np.tile([0.3, 0.1, 0.2], (3, 1))
    np.testing.assert_allclose(softmin_gradient(same, [0.2, 0.5, 0.3]), same[0], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=1, max_size=8), st.floats(1e-3, 1e6))
def test_bounds_hold_exactly(g, alpha):
    H = softmin_value(g, alpha)
    lo = min(g)
    assert lo - math.log(len(g)) / alpha <= H <= lo


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=1, max_size=6), st.floats(1e-2, 1e3), st.floats(-20, 20))
def test_weights_shift_invariant(g, alpha, c):
    p = softmin_weights(g, alpha)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(softmin_weights(np.add(g, c), alpha), p, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=2, max_size=6), st.floats(1e-2, 1e2), st.integers(0, 5), st.floats(0, 5))
def test_monotone_in_each_value(g, alpha, i, bump):
    i %= len(g)
    up = list(g)
    up[i] += bump
    assert softmin_value(up, alpha) >= softmin_value(g, alpha) - 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sandwich(seed):
    rng = np.random.default_rng(seed)
    n, T, k = int(rng.integers(2, 9)), int(rng.integers(1, 50)), int(rng.integers(1, 6))
    alpha = float(n * n * T * T)
    g = rng.random(k)
    H = softmin_value(g, alpha)
    avg = softmin_weights(g, alpha) @ g
    assert H - 1e-15 <= avg <= H + sandwich_slack(n, T, k, alpha)


def test_multilinear_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-4
    for _ in range(5):
        n = int(rng.integers(3, 9))
        fs = [unit_coverage(n, rng) for _ in range(int(rng.integers(2, 4)))]
        y = rng.uniform(0.1, 0.9, n)
        alpha = float(rng.uniform(1, 20))
        _, grad = softmin_multilinear(fs, y, alpha)
        fd = np.empty(n)
        for e in range(n):
            up, dn = y.copy(), y.copy()
            up[e] += h
            dn[e] -= h
            fd[e] = (softmin_multilinear(fs, up, alpha)[0] - softmin_multilinear(fs, dn, alpha)[0]) / (2 * h)
        rel = np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-3)
        assert rel.max() <= 1e-5


def test_delta_identity_exact():
    rng = np.random.default_rng(1)
    fs = [unit_coverage(6, rng) for _ in range(2)]
    for _ in range(5):
        y = rng.random(6)
        _, grad = softmin_multilinear(fs, y, 7.0)
        np.testing.assert_allclose(delta_H(y, fs, 7.0, exact=True), (1 - y) * grad, atol=1e-9)


def test_delta_k1_and_saturated():
    rng = np.random.default_rng(2)
    f = unit_coverage(6, rng)
    y = rng.random(6)
    np.testing.assert_allclose(delta_H(y, [f], 3.0, exact=True), delta_vector(f, y, exact=True)[0], atol=1e-12)
    fs = [f, unit_coverage(6, rng)]
    assert (delta_H(np.ones(6), fs, 3.0, exact=True) == 0).all()


def test_delta_nonnegative_and_bounded():
    rng = np.random.default_rng(3)
    for _ in range(10):
        fs = [unit_coverage(7, rng) for _ in range(3)]
        D = delta_H(rng.random(7), fs, 50.0, exact=True)
        assert (D >= -1e-15).all() and (D <= 1 + 1e-12).all() and D.sum() <= 7


def test_hessian_proxy():
    rng = np.random.default_rng(4)
    h = 1e-3
    for _ in range(5):
        n = 5
        fs = [unit_coverage(n, rng) for _ in range(3)]
        y = rng.uniform(0.1, 0.9, n)
        alpha = float(rng.uniform(1, 30))
        H = lambda z: softmin_multilinear(fs, z, alpha)[0]
        for a in range(n):
            for b in range(n):
                ea, eb = np.eye(n)[a] * h, np.eye(n)[b] * h
                d2 = (H(y + ea + eb) - H(y + ea - eb) - H(y - ea + eb) + H(y - ea - eb)) / (4 * h * h)
                assert abs(d2) <= 2 * alpha + 1 + 1e-3


def test_taylor_inequality():
    rng = np.random.default_rng(5)
    T, n, delta = 10, 5, 0.05
    alpha = 40.0
    rounds = [[unit_coverage(n, rng) for _ in range(2)] for _ in range(T)]
    for _ in range(20):
        lhs = rhs = 0.0
        for fs in rounds:
            x = rng.uniform(delta, 1 - delta, n)
            y = x + rng.uniform(-delta, delta, n)
            Hx, gx = softmin_multilinear(fs, x, alpha)
            Hy, _ = softmin_multilinear(fs, y, alpha)
            lhs += Hy - Hx
            rhs += gx @ (y - x)
        assert lhs >= rhs - 2 * T * n**3 * delta**2 * alpha


def test_weights_follow_exact_values():
    rng = np.random.default_rng(6)
    fs = [unit_coverage(5, rng) for _ in range(3)]
    y = rng.random(5)
    F, _ = exact_objectives(fs, y)
    H, _ = softmin_multilinear(fs, y, 9.0)
    assert H == pytest.approx(oracles.softmin_hp(F, 9.0), abs=1e-14)
