import math

import numpy as np
import pytest

from outliersim.methods import (
    ALL_METHOD_IDS,
    MethodSpec,
    default_methods,
    detect_and_correct,
    detection_mask,
    grubbs_critical,
    grubbs_critical_table,
)


def spec(mid, **kw):
    return MethodSpec(id=mid, **kw)


def test_default_methods_cover_all_ids():
    assert tuple(m.id for m in default_methods()) == ALL_METHOD_IDS


def test_method_spec_validation():
    with pytest.raises(ValueError):
        spec("zscore")
    with pytest.raises(ValueError):
        spec("mad", mad_threshold=0.0)
    with pytest.raises(ValueError):
        spec("winsorize", winsorize_limit=0.5)
    with pytest.raises(ValueError):
        spec("grubbs", grubbs_alpha=1.0)
    with pytest.raises(ValueError):
        spec("sigma2", std_divisor="bessel")


def test_labels_mark_non_default_settings():
    assert spec("mad").label() == "mad"
    assert spec("mad", mad_threshold=3.0).label() == "mad(3)"
    assert spec("winsorize", winsorize_limit=0.1).label() == "winsorize(0.1)"


def test_sigma2_masking_hides_a_big_outlier():
    # 100 inflates the sd so much that it stays within 2 sd of the mean
    x = np.array([1.0, 2.0, 3.0, 4.0, 100.0])
    out = detect_and_correct(x, spec("sigma2"))
    assert out.flagged == ()
    assert out.n_removed == 0
    assert np.array_equal(out.corrected, x)


def test_mad_catches_what_sigma2_misses():
    x = np.array([1.0, 2.0, 3.0, 4.0, 100.0])
    out = detect_and_correct(x, spec("mad"))
    assert out.flagged == (4,)
    assert np.array_equal(out.corrected, x[:4])
    assert out.n_removed == 1 and out.n_modified == 0


def test_iqr_on_the_same_sample():
    # type-7 quartiles of [1,2,3,4,100] are 2 and 4; fences -1 and 7
    x = np.array([1.0, 2.0, 3.0, 4.0, 100.0])
    out = detect_and_correct(x, spec("iqr"))
    assert out.flagged == (4,)


def test_sigma2_flags_when_deviation_clears_two_sd():
    x = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 10.0])
    s = x.std(ddof=1)
    assert abs(10.0 - x.mean()) > 2.0 * s  # sanity on the arithmetic
    out = detect_and_correct(x, spec("sigma2"))
    assert out.flagged == (5,)
    assert len(out.corrected) == 5


def test_std_divisor_n_changes_the_verdict():
    # borderline case: flagged under divisor n, hidden under n-1
    x = np.array([-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 4.407])
    m = x.mean()
    assert abs(4.407 - m) < 2.0 * x.std(ddof=1)
    assert abs(4.407 - m) > 2.0 * x.std(ddof=0)
    assert detect_and_correct(x, spec("sigma2")).flagged == ()
    assert detect_and_correct(x, spec("sigma2", std_divisor="n")).flagged == (6,)


def test_accommodation_clamps_instead_of_removing():
    x = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 10.0])
    out = detect_and_correct(x, spec("accommodation_sigma2"))
    assert out.flagged == (5,)
    assert out.n_removed == 0 and out.n_modified == 1
    assert len(out.corrected) == len(x)
    expected = x.mean() + 2.0 * x.std(ddof=1)
    assert out.corrected[5] == pytest.approx(expected)
    assert np.array_equal(out.corrected[:5], x[:5])


def test_accommodation_clamps_low_side_too():
    x = np.array([0.0, 0.0, 0.0, 0.0, 0.0, -10.0])
    out = detect_and_correct(x, spec("accommodation_sigma2"))
    assert out.corrected[5] == pytest.approx(x.mean() - 2.0 * x.std(ddof=1))


def test_mad_zero_mad_flags_everything_off_median():
    x = np.array([5.0, 5.0, 5.0, 5.0, 9.0])
    out = detect_and_correct(x, spec("mad"))
    assert out.flagged == (4,)
    x_same = np.full(6, 2.5)
    assert detect_and_correct(x_same, spec("mad")).flagged == ()


def test_mad_threshold_is_strict():
    # a robust z-score exactly at the threshold is not flagged (> not >=)
    x = np.array([-1.0, 0.0, 0.0, 1.0, 5.0])
    mad_star = 1.4826 * 1.0  # median absolute deviation is exactly 1
    score = 5.0 / mad_star
    at = detect_and_correct(x, spec("mad", mad_threshold=score))
    below = detect_and_correct(x, spec("mad", mad_threshold=score - 1e-9))
    assert 4 not in at.flagged
    assert 4 in below.flagged


def test_grubbs_critical_reference_values():
    # published two-sided critical values at alpha 0.05
    assert grubbs_critical(3, 0.05) == pytest.approx(1.1543, abs=2e-4)
    assert grubbs_critical(10, 0.05) == pytest.approx(2.290, abs=2e-3)
    with pytest.raises(ValueError):
        grubbs_critical(2, 0.05)


def test_grubbs_iterates_and_stops():
    x = np.array([1.0, 2.0, 3.0, 4.0, 100.0])
    out = detect_and_correct(x, spec("grubbs", grubbs_alpha=0.05))
    assert out.flagged == (4,)
    assert np.array_equal(out.corrected, x[:4])


def test_grubbs_stops_below_three_survivors():
    # removing from n=3 leaves 2, where the statistic is undefined, so
    # iteration must stop after one removal no matter how liberal alpha is
    x = np.array([0.0, 0.1, 1000.0])
    out = detect_and_correct(x, spec("grubbs", grubbs_alpha=0.95))
    assert out.flagged == (2,)
    assert len(out.corrected) == 2


def test_grubbs_needs_three_points():
    with pytest.raises(ValueError):
        detect_and_correct(np.array([1.0, 2.0]), spec("grubbs"))


def test_winsorize_counts_per_tail():
    gen = np.random.default_rng(3)
    x = gen.standard_normal(20)
    out = detect_and_correct(x, spec("winsorize"))
    xs = np.sort(x)
    # limit 0.05 at n=20 clips one value per tail
    assert out.n_removed == 0
    assert out.n_modified == 2
    assert set(out.flagged) == {int(np.argmin(x)), int(np.argmax(x))}
    assert np.min(out.corrected) == pytest.approx(xs[1])
    assert np.max(out.corrected) == pytest.approx(xs[18])
    assert np.sort(out.corrected)[1:19] == pytest.approx(xs[1:19])


def test_winsorize_is_a_no_op_below_twenty():
    gen = np.random.default_rng(4)
    for n in (6, 10, 19):
        x = gen.standard_normal(n)
        out = detect_and_correct(x, spec("winsorize"))
        assert out.flagged == ()
        assert np.array_equal(out.corrected, x)


def test_removal_preserves_order_of_survivors():
    x = np.array([3.0, 50.0, 1.0, 2.0, -40.0, 4.0])
    out = detect_and_correct(x, spec("mad"))
    survivors = [v for i, v in enumerate(x) if i not in out.flagged]
    assert np.array_equal(out.corrected, survivors)


def test_none_method_changes_nothing():
    x = np.array([1.0, 2.0, 300.0])
    out = detect_and_correct(x, spec("none"))
    assert out.flagged == ()
    assert np.array_equal(out.corrected, x)
    assert detection_mask(x, spec("none")).sum() == 0


@pytest.mark.parametrize("mid", ALL_METHOD_IDS)
def test_mask_agrees_with_outcome(mid):
    gen = np.random.default_rng(11)
    m = spec(mid)
    for _ in range(40):
        n = int(gen.integers(max(3, m.min_length()), 30))
        x = np.exp(gen.standard_normal(n))  # skewed, produces flags often
        mask = detection_mask(x, m)
        out = detect_and_correct(x, m)
        assert set(np.flatnonzero(mask)) == set(out.flagged)
        assert bool(mask.any()) == out.any_flagged
        if mid in ("accommodation_sigma2", "winsorize"):
            assert len(out.corrected) == n
            changed = set(np.flatnonzero(out.corrected != x))
            assert changed <= set(out.flagged)
        else:
            assert len(out.corrected) == n - out.n_removed


def test_critical_table_is_cached_and_frozen():
    t1 = grubbs_critical_table(30, 0.95)
    t2 = grubbs_critical_table(30, 0.95)
    assert t1 is t2
    with pytest.raises(ValueError):
        t1[5] = 0.0
    assert math.isnan(t1[2])
