import itertools
import json
from pathlib import Path

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from evasim.stats import (
    ComparisonPolicy,
    Sample,
    StatsError,
    StatTestResult,
    compare_groups,
    f_test,
    midranks,
    shapiro_wilk,
    t_test,
    wilcoxon_signed_rank,
)

FIXTURES = json.loads((Path(__file__).parent / "fixtures" / "shapiro_n12.json").read_text())["fixtures"]


def wilcoxon_enumeration_oracle(x, y):
    """Two-sided exact p by enumerating all 2^n sign assignments (ranks from scipy)."""
    d = np.asarray(x, float) - np.asarray(y, float)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 0.0, 1.0
    r = sps.rankdata(np.abs(d))
    w_obs = r[d > 0].sum()
    signs = np.array(list(itertools.product((0, 1), repeat=n)), dtype=float)
    w_all = signs @ r
    mean = r.sum() / 2
    hits = int(np.sum(np.abs(w_all - mean) >= abs(w_obs - mean) - 1e-9))
    return float(w_obs), hits / 2**n


class TestSample:
    def test_rejects_nonfinite(self):
        with pytest.raises(StatsError):
            Sample([1.0, float("nan")])

    def test_p_value_range(self):
        with pytest.raises(StatsError):
            StatTestResult("x", 0.0, 1.5, True, 3)


class TestWilcoxon:
    def test_all_positive_n5(self):
        r = wilcoxon_signed_rank([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
        assert r.p_value == 0.0625 and r.exact and r.statistic == 15.0

    def test_identical_degenerate(self):
        r = wilcoxon_signed_rank([1, 2, 3], [1, 2, 3])
        assert r.degenerate and r.p_value == 1.0

    def test_needs_pairs(self):
        with pytest.raises(StatsError):
            wilcoxon_signed_rank([1, 2], [1, 2, 3])
        with pytest.raises(StatsError):
            wilcoxon_signed_rank([1, 2], [1, 2], paired=False)

    def test_midranks_ties(self):
        assert list(midranks([3, 1, 3, 2])) == [3.5, 1.0, 3.5, 2.0]

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(-6, 6), st.integers(-6, 6)), min_size=1, max_size=10))
    def test_matches_enumeration(self, pairs):
        x, y = zip(*pairs)
        w, p = wilcoxon_enumeration_oracle(x, y)
        r = wilcoxon_signed_rank(x, y)
        assert r.statistic == w and r.p_value == p

    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=12))
    def test_swap_symmetric(self, d):
        z = [0.0] * len(d)
        assert wilcoxon_signed_rank(d, z).p_value == wilcoxon_signed_rank(z, d).p_value

    def test_large_n_normal_approx(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(0, 1, 40), rng.normal(0.3, 1, 40)
        r = wilcoxon_signed_rank(x, y)
        ref = sps.wilcoxon(x, y, correction=True, method="approx")
        assert not r.exact and r.p_value == pytest.approx(ref.pvalue, rel=1e-9)


class TestShapiro:
    @pytest.mark.parametrize("fx", FIXTURES, ids=[f["name"] for f in FIXTURES])
    def test_fixtures(self, fx):
        r = shapiro_wilk(fx["values"])
        assert r.statistic == pytest.approx(fx["W"], abs=1e-3)
        assert r.p_value == pytest.approx(fx["p"], abs=1e-3)

    def test_constant(self):
        with pytest.raises(StatsError, match="zero variance"):
            shapiro_wilk([2.0] * 12)

    @pytest.mark.parametrize("n", [2, 51])
    def test_size_bounds(self, n):
        with pytest.raises(StatsError):
            shapiro_wilk(np.arange(n, dtype=float))

    @given(st.lists(st.floats(-100, 100), min_size=3, max_size=30).filter(lambda v: np.ptp(v) > 1e-6))
    def test_w_in_unit_interval(self, xs):
        r = shapiro_wilk(xs)
        assert 0 < r.statistic <= 1 + 1e-12 and 0 <= r.p_value <= 1

    @given(st.floats(0.1, 100), st.floats(-50, 50))
    def test_affine_invariant(self, a, b):
        base = FIXTURES[1]["values"]
        r1 = shapiro_wilk(base)
        r2 = shapiro_wilk([a * v + b for v in base])
        assert r2.statistic == pytest.approx(r1.statistic, abs=1e-9)


class TestFAndT:
    def test_f_against_mpmath(self):
        rng = np.random.default_rng(3)
        x = rng.normal(0, 2, 12)
        y = rng.normal(0, 1, 12)
        r = f_test(x, y)
        vx, vy = np.var(x, ddof=1), np.var(y, ddof=1)
        f = max(vx, vy) / min(vx, vy)
        d = mpmath.mpf(11)
        sf = 1 - mpmath.betainc(d / 2, d / 2, 0, d * f / (d * f + d), regularized=True)
        assert r.statistic == pytest.approx(f, rel=1e-12)
        assert r.p_value == pytest.approx(float(2 * sf), abs=1e-6)

    def test_f_symmetric(self):
        x, y = [1, 4, 2, 8, 5], [3, 3.5, 2.9, 3.3]
        assert f_test(x, y).p_value == f_test(y, x).p_value

    def test_f_zero_variance(self):
        with pytest.raises(StatsError):
            f_test([1, 1, 1], [1, 2, 3])

    @pytest.mark.parametrize("variant,eq", [("equal_var", True), ("welch", False)])
    def test_t_against_scipy(self, variant, eq):
        rng = np.random.default_rng(4)
        x, y = rng.normal(0, 1, 12), rng.normal(0.8, 2, 12)
        r = t_test(x, y, variant)
        ref = sps.ttest_ind(x, y, equal_var=eq)
        assert r.statistic == pytest.approx(ref.statistic, rel=1e-9)
        assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9)

    def test_paired_against_scipy(self):
        rng = np.random.default_rng(5)
        x = rng.normal(0, 1, 12)
        y = x + rng.normal(0.2, 0.3, 12)
        r = t_test(x, y, paired=True)
        ref = sps.ttest_rel(x, y)
        assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9)

    @given(st.floats(0.01, 1000))
    def test_t_scale_invariant(self, s):
        x, y = np.array([1.0, 2.5, 3.1, 4.7]), np.array([2.2, 3.9, 4.1, 6.0])
        assert t_test(s * x, s * y).p_value == pytest.approx(t_test(x, y).p_value, rel=1e-9)

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            t_test([1, 2], [3, 4], "student")


class TestCompareGroups:
    def test_non_normal_goes_to_wilcoxon(self):
        x = [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 10.0]
        y = list(np.linspace(1, 2, 12))
        r = compare_groups(x, y)
        assert r.test_name == "wilcoxon_signed_rank"
        assert [n for n, _ in r.provenance][:2] == ["shapiro_wilk:x", "shapiro_wilk:y"]

    def test_equal_variance_path(self):
        fx = FIXTURES[1]["values"]
        x = np.array(fx)
        r = compare_groups(x, x[::-1] + 1.0)
        assert r.test_name == "t_equal_var"
        assert [n for n, _ in r.provenance] == ["shapiro_wilk:x", "shapiro_wilk:y", "f_test", "t_equal_var"]

    def test_welch_path(self):
        x = np.array(FIXTURES[1]["values"])
        r = compare_groups(x, 5 * x[::-1] + 1.0)
        assert r.test_name == "t_welch"

    def test_zero_variance_routes_to_rank_test(self):
        r = compare_groups(Sample([18.79] * 12, "myo"), Sample(np.linspace(30, 40, 12), "wheel"))
        assert r.test_name == "wilcoxon_signed_rank"
        assert r.provenance[0] == ("shapiro_wilk:myo:zero_variance", 0.0)
        assert r.p_value == wilcoxon_signed_rank([18.79] * 12, np.linspace(30, 40, 12)).p_value

    def test_alpha_changes_route(self):
        x = np.array(FIXTURES[1]["values"])
        y = x[::-1] + 1.0
        assert compare_groups(x, y, ComparisonPolicy(alpha=0.999)).test_name == "wilcoxon_signed_rank"

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            ComparisonPolicy(alpha=1.0)
