import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from instances import coverage_pair, facility_pair
from robustsub import (
    CoverageFunction,
    DomainError,
    FacilityLocationFunction,
    LambdaFunction,
    ModularFunction,
    ParameterError,
    SizeLimitError,
    TruncatedFunction,
    build_robust_average,
    check_submodular_monotone,
    mix,
    perturbed_family,
)
from robustsub.functions import PerturbedFamilySpec, load_ratings_csv, marginal, mask_of, set_of


def test_marginal_modular():
    w = [0.5, 1.5, 2.5, 3.5]
    assert marginal(ModularFunction(w), set(), 2) == 2.5


def test_marginal_of_member_is_zero():
    f, _ = coverage_pair(6, np.random.default_rng(0))
    assert marginal(f, {1, 3}, 3) == 0.0


def test_marginal_dominated_facility_column():
    R = np.array([[5, 2, 0], [4, 1, 3], [3, 3, 2]], dtype=float)
    f = FacilityLocationFunction(R)
    ref = oracles.facility(R)
    assert marginal(f, {0}, 1) == pytest.approx(ref({0, 1}) - ref({0}), abs=1e-12)
    assert marginal(f, {0}, 1) == 0.0


def test_marginal_call_count_and_domain():
    f = ModularFunction([1.0, 2.0, 3.0])
    marginal(f, {0}, 1)
    assert f.call_count == 2
    marginal(f, {0}, 2, base_value=1.0)
    assert f.call_count == 3
    with pytest.raises(DomainError):
        marginal(f, set(), 5)


def test_robust_average_examples():
    f1 = LambdaFunction(2, lambda S: 0.4)
    f2 = LambdaFunction(2, lambda S: 1.2)
    assert build_robust_average([f1, f2], 1.0)({0}) == pytest.approx(0.7)
    f, ref = coverage_pair(5, np.random.default_rng(1))
    g = build_robust_average([f], 0.8)
    for S in oracles.subsets(5):
        assert g(S) == pytest.approx(min(ref(S), 0.8), abs=1e-12)
    with pytest.raises(ParameterError):
        build_robust_average([f], 0.0)


def test_robust_average_submodular_exhaustive():
    rng = np.random.default_rng(2)
    fs = [coverage_pair(6, rng)[0] for _ in range(3)]
    assert check_submodular_monotone(build_robust_average(fs, 1.0)).ok


def test_robust_average_max_equals_gamma_below_opt():
    rng = np.random.default_rng(3)
    pairs = [coverage_pair(6, rng) for _ in range(3)]
    opt, _ = oracles.max_min([r for _, r in pairs], lambda S: len(S) <= 2, 6)
    gamma = 0.9 * opt
    g = build_robust_average([f for f, _ in pairs], gamma)
    best = max(g(S) for S in oracles.subsets(6) if len(S) <= 2)
    assert best == pytest.approx(gamma, abs=1e-12)
    for S in oracles.subsets(6):
        assert g(S) <= gamma + 1e-12
        assert g(S) <= np.mean([r(S) for _, r in pairs]) + 1e-12


def test_mix_examples():
    rng = np.random.default_rng(4)
    f1, _ = coverage_pair(5, rng)
    f2, _ = coverage_pair(5, rng)
    m = mix([1.0, 0.0], [f1, f2])
    for S in oracles.subsets(5):
        assert m(S) == f1(S)
    assert f2.call_count == 0
    same = mix([1 / 3] * 3, [f1, f1, f1])
    assert same({0, 2}) == pytest.approx(f1({0, 2}))
    w1, w2 = rng.random(5), rng.random(5)
    blend = mix([0.3, 0.7], [ModularFunction(w1), ModularFunction(w2)])
    ref = oracles.modular(0.3 * w1 + 0.7 * w2)
    for S in oracles.subsets(5):
        assert blend(S) == pytest.approx(ref(S), abs=1e-12)
    with pytest.raises(ParameterError):
        mix([0.5, 0.6], [f1, f2])
    with pytest.raises(ParameterError):
        mix([1.5, -0.5], [f1, f2])


def test_property_checker():
    assert check_submodular_monotone(ModularFunction([1.0, 2.0, 0.0])).ok
    rep = check_submodular_monotone(LambdaFunction(4, lambda S: len(S) ** 2))
    assert rep.monotone and not rep.submodular
    assert rep.counterexample["kind"] == "submodular"
    drop = check_submodular_monotone(LambdaFunction(3, lambda S: -len(S)))
    assert not drop.monotone
    with pytest.raises(SizeLimitError):
        check_submodular_monotone(ModularFunction(np.ones(17)))


def test_perturbed_family_members_pass():
    rng = np.random.default_rng(5)
    base, _ = facility_pair(8, rng)
    fam = perturbed_family(base, 3, 4, None, 7)
    for f in fam:
        assert check_submodular_monotone(f).ok
    again = perturbed_family(base, 3, 4, None, 7)
    for a, b in zip(fam, again):
        assert a.support == b.support
        assert a(range(8)) == b(range(8))


def test_perturbed_member_formula():
    rng = np.random.default_rng(6)
    base, ref = facility_pair(6, rng)
    (f,) = perturbed_family(base, 1, 3, 0.5, 1)
    for S in oracles.subsets(6):
        bonus = 0.5 * sum(f.xi[e] for e in S & f.support)
        assert f(S) == pytest.approx(ref(S) + bonus, abs=1e-12)


def test_empty_set_values():
    rng = np.random.default_rng(7)
    assert coverage_pair(5, rng)[0](set()) == 0.0
    assert facility_pair(5, rng)[0](set()) == 0.0
    assert ModularFunction([1.0, 2.0])(set()) == 0.0


def test_truncation():
    f, ref = coverage_pair(6, np.random.default_rng(8))
    t = TruncatedFunction(f, 1.0)
    for S in oracles.subsets(6):
        assert t(S) == pytest.approx(min(ref(S), 1.0), abs=1e-12)
    assert check_submodular_monotone(t).ok
    with pytest.raises(ParameterError):
        TruncatedFunction(f, -1.0)


def test_wrappers_attribute_calls_to_inner():
    f = ModularFunction([1.0, 2.0, 3.0])
    t = TruncatedFunction(f, 2.0)
    t({0, 1})
    t({2})
    assert t.call_count == 2 and f.call_count == 2


def test_concurrent_call_counter():
    f = ModularFunction(np.ones(4))

    def work():
        for _ in range(500):
            f({0, 1})

    threads = [threading.Thread(target=work) for _ in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert f.call_count == 4000


def test_value_table_matches_oracle():
    rng = np.random.default_rng(9)
    for f, ref in (coverage_pair(7, rng), facility_pair(7, rng)):
        t = f.value_table()
        for m in range(1 << 7):
            assert t[m] == pytest.approx(ref(set_of(m)), abs=1e-12)


def test_vectorized_marginals_match_scalar():
    rng = np.random.default_rng(10)
    base, _ = facility_pair(7, rng)
    fam = perturbed_family(base, 2, 3, 0.2, 3) + [coverage_pair(7, rng)[0]]
    S = frozenset({1, 4})
    for f in fam:
        got = f.values_with(S, range(7))
        want = [f(S | {e}) for e in range(7)]
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_facility_rejects_out_of_range_ratings():
    with pytest.raises(ParameterError):
        FacilityLocationFunction([[6.0, 1.0]])


def test_ratings_csv_and_family_spec(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("a,b,c\n5,0,1\n2,3,4\n")
    R, labels = load_ratings_csv(p)
    assert labels == ["a", "b", "c"] and R.shape == (2, 3)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,x\n")
    with pytest.raises(ParameterError):
        load_ratings_csv(bad)
    spec = PerturbedFamilySpec.from_json('{"k": 2, "lambda_size": 1, "seed": 4}')
    fam = spec.build(FacilityLocationFunction(R))
    assert len(fam) == 2 and all(len(f.support) == 1 for f in fam)
    with pytest.raises(ParameterError):
        PerturbedFamilySpec.from_json("{}")


@settings(max_examples=60, deadline=None)
@given(st.sets(st.integers(0, 40), max_size=12))
def test_mask_roundtrip(S):
    assert set_of(mask_of(S)) == frozenset(S)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.floats(0.05, 3.0))
def test_robust_average_bounds(seed, k, gamma):
    rng = np.random.default_rng(seed)
    fs = [coverage_pair(5, rng)[0] for _ in range(k)]
    g = build_robust_average(fs, gamma)
    for S in oracles.subsets(5):
        vals = [f(S) for f in fs]
        assert g(S) <= gamma + 1e-12
        assert (g(S) >= gamma - 1e-12) == (min(vals) >= gamma - 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_coverage_is_monotone_submodular(seed):
    f = CoverageFunction.random(6, 8, 0.4, seed, "random")
    assert check_submodular_monotone(f).ok
