import itertools
import math

import numpy as np
import pytest
import scipy.stats

from outliersim.stat_tests import (
    DegenerateSampleError,
    TestSpec,
    mann_whitney,
    permutation_test,
    permutation_test_exhaustive,
    run_test,
    t_test,
)
from outliersim.streams import RngStream

GEN = np.random.default_rng(90125)


def test_test_spec_validation():
    with pytest.raises(ValueError):
        TestSpec(id="wilcoxon")
    with pytest.raises(ValueError):
        TestSpec(id="permutation", n_permutations=0)


def test_t_test_matches_scipy():
    for _ in range(50):
        na, nb = int(GEN.integers(2, 30)), int(GEN.integers(2, 30))
        a = GEN.standard_normal(na) * 1.7
        b = GEN.standard_normal(nb) + 0.4
        ours = t_test(a, b)
        ref = scipy.stats.ttest_ind(a, b, equal_var=True)
        assert ours.statistic == pytest.approx(ref.statistic, abs=1e-10)
        assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-10)


def test_t_test_degenerate():
    a = np.array([2.0, 2.0, 2.0])
    b = np.array([2.0, 2.0])
    with pytest.raises(DegenerateSampleError):
        t_test(a, b)


def test_t_test_identical_means():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([1.0, 2.0, 3.0])
    out = t_test(a, b)
    assert out.statistic == 0.0
    assert out.p_value == 1.0


def test_mw_exact_matches_scipy_when_tie_free():
    for _ in range(40):
        na, nb = int(GEN.integers(2, 8)), int(GEN.integers(2, 8))
        a = GEN.standard_normal(na)
        b = GEN.standard_normal(nb)
        ours = mann_whitney(a, b)
        ref = scipy.stats.mannwhitneyu(a, b, alternative="two-sided", method="exact")
        assert ours.statistic == pytest.approx(ref.statistic)
        assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-12)


def test_mw_normal_approximation_matches_scipy():
    for _ in range(25):
        na, nb = int(GEN.integers(12, 40)), int(GEN.integers(12, 40))
        a = GEN.standard_normal(na)
        b = GEN.standard_normal(nb)
        ours = mann_whitney(a, b)
        ref = scipy.stats.mannwhitneyu(
            a, b, alternative="two-sided", method="asymptotic", use_continuity=True
        )
        assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-10)


def test_mw_tie_corrected_approximation():
    # heavy ties force both the midrank statistic and the variance correction
    for _ in range(25):
        a = GEN.integers(0, 4, size=15).astype(float)
        b = GEN.integers(0, 4, size=18).astype(float)
        ours = mann_whitney(a, b)
        ref = scipy.stats.mannwhitneyu(
            a, b, alternative="two-sided", method="asymptotic", use_continuity=True
        )
        assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-10)


def test_mw_ties_disable_the_exact_path():
    a = np.array([1.0, 2.0, 2.0, 4.0])
    b = np.array([2.0, 5.0, 6.0])
    ours = mann_whitney(a, b)
    ref = scipy.stats.mannwhitneyu(
        a, b, alternative="two-sided", method="asymptotic", use_continuity=True
    )
    assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-12)


def test_mw_all_identical_gives_p_one():
    a = np.full(5, 3.0)
    b = np.full(6, 3.0)
    assert mann_whitney(a, b).p_value == 1.0


def _mw_brute_force_p(a, b) -> float:
    """Enumerate all rank assignments; two-sided exact p for U1."""
    pool = np.concatenate([a, b])
    na = len(a)
    n = len(pool)
    ranks = scipy.stats.rankdata(pool)
    u_obs = ranks[:na].sum() - na * (na + 1) / 2
    count_le = 0
    count_ge = 0
    total = 0
    for idx in itertools.combinations(range(n), na):
        u = ranks[list(idx)].sum() - na * (na + 1) / 2
        total += 1
        if u <= u_obs:
            count_le += 1
        if u >= u_obs:
            count_ge += 1
    return min(1.0, 2.0 * min(count_le, count_ge) / total)


def test_mw_exact_equals_enumeration_small():
    for _ in range(10):
        na, nb = int(GEN.integers(2, 6)), int(GEN.integers(2, 6))
        a = GEN.standard_normal(na)
        b = GEN.standard_normal(nb)
        assert mann_whitney(a, b).p_value == pytest.approx(
            _mw_brute_force_p(a, b), abs=1e-12
        )


def test_permutation_deterministic_per_stream():
    a = GEN.standard_normal(10)
    b = GEN.standard_normal(10)
    s = RngStream(77, ("perm",))
    p1 = permutation_test(a, b, s).p_value
    p2 = permutation_test(a, b, s).p_value
    assert p1 == p2
    other = permutation_test(a, b, RngStream(78, ("perm",))).p_value
    # same data, different stream: values may differ but stay close
    assert abs(p1 - other) < 0.2


def test_permutation_addsone_never_zero():
    a = np.zeros(6)
    b = np.full(6, 40.0)
    out = permutation_test(a, b, RngStream(1, ("p",)))
    assert out.p_value == pytest.approx(1.0 / 601.0)
    assert out.p_value > 0.0


def test_permutation_identical_samples_p_one():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    out = permutation_test(a, a.copy(), RngStream(2, ("p",)))
    assert out.p_value == 1.0


def test_exhaustive_permutation_matches_naive_enumeration():
    a = GEN.standard_normal(4)
    b = GEN.standard_normal(5)
    ours = permutation_test_exhaustive(a, b)
    pool = np.concatenate([a, b])
    t_obs = a.mean() - b.mean()
    thr = abs(t_obs) - 1e-12 * max(abs(t_obs), 1.0)
    hits = 0
    total = 0
    for idx in itertools.combinations(range(9), 4):
        mask = np.zeros(9, dtype=bool)
        mask[list(idx)] = True
        t = pool[mask].mean() - pool[~mask].mean()
        total += 1
        if abs(t) >= thr:
            hits += 1
    assert total == math.comb(9, 4)
    assert ours.p_value == hits / total
    assert ours.statistic == pytest.approx(t_obs)


def test_exhaustive_flag_through_spec():
    a = GEN.standard_normal(4)
    b = GEN.standard_normal(4)
    spec = TestSpec(id="permutation", exhaustive=True)
    direct = permutation_test_exhaustive(a, b)
    via_spec = run_test(spec, a, b, RngStream(0, ()))
    assert via_spec.p_value == direct.p_value


def test_run_test_dispatch():
    a = GEN.standard_normal(8)
    b = GEN.standard_normal(8)
    assert run_test(TestSpec(id="ttest"), a, b).p_value == t_test(a, b).p_value
    assert (
        run_test(TestSpec(id="mann_whitney"), a, b).p_value
        == mann_whitney(a, b).p_value
    )
    with pytest.raises(ValueError):
        run_test(TestSpec(id="permutation"), a, b)  # no stream given


def test_exact_cutoff_respects_spec():
    # min sample size above exact_mw_max_n switches to the approximation
    a = GEN.standard_normal(9)
    b = GEN.standard_normal(9)
    default = mann_whitney(a, b)
    wide = mann_whitney(a, b, TestSpec(id="mann_whitney", exact_mw_max_n=9))
    ref = scipy.stats.mannwhitneyu(a, b, alternative="two-sided", method="exact")
    assert wide.p_value == pytest.approx(ref.pvalue, abs=1e-12)
    approx_ref = scipy.stats.mannwhitneyu(
        a, b, alternative="two-sided", method="asymptotic", use_continuity=True
    )
    assert default.p_value == pytest.approx(approx_ref.pvalue, abs=1e-10)
