"""Screening statistics vs hand values, closed forms and scipy oracles."""

import math

import numpy as np
import pandas as pd
import pytest
import scipy.special
import scipy.stats

from loadcast.featsel import (
    RankDeficientError,
    ScreenError,
    ZeroVarianceError,
    betainc_regularized,
    copula_entropy,
    f_sf,
    granger_test,
    kendall,
    pearson,
    rank_average,
    screen,
    spearman,
)


class TestPearson:
    def test_perfect_linear(self):
        x = np.arange(10.0)
        assert pearson(x, 2 * x + 1) == pytest.approx(1.0, abs=1e-12)

    def test_antitone(self):
        x = np.arange(10.0)
        assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-12)

    def test_hand_value(self):
        assert pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-12)

    def test_self_correlation_exact(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=50)
        assert pearson(x, x) == 1.0

    def test_zero_variance_rejected(self):
        with pytest.raises(ZeroVarianceError):
            pearson([1, 1, 1], [1, 2, 3])

    def test_affine_invariance(self):
        rng = np.random.default_rng(1)
        x, y = rng.normal(size=40), rng.normal(size=40)
        base = pearson(x, y)
        assert pearson(3 * x + 5, y) == pytest.approx(base, abs=1e-12)
        assert pearson(x, 0.1 * y - 2) == pytest.approx(base, abs=1e-12)


class TestSpearman:
    def test_monotone_transform_is_one(self):
        x = np.linspace(0, 3, 20)
        assert spearman(x, np.exp(x)) == pytest.approx(1.0, abs=1e-12)

    def test_reversed_is_minus_one(self):
        x = np.arange(15.0)
        assert spearman(x, x[::-1]) == pytest.approx(-1.0, abs=1e-12)

    def test_hand_value(self):
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-12)

    def test_matches_scipy(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            x = rng.normal(size=30)
            y = rng.normal(size=30) + 0.5 * x
            expect = scipy.stats.spearmanr(x, y).statistic
            assert spearman(x, y) == pytest.approx(expect, abs=1e-12)

    def test_monotone_invariance_exact(self):
        rng = np.random.default_rng(3)
        x, y = rng.normal(size=25), rng.normal(size=25)
        assert spearman(np.exp(x), y) == spearman(x, y)


class TestKendall:
    def test_identical_orderings(self):
        x = np.arange(12.0)
        assert kendall(x, 3 * x + 2) == pytest.approx(1.0, abs=1e-12)

    def test_hand_value(self):
        # 2 concordant, 1 discordant of 3 pairs
        assert kendall([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3, abs=1e-12)

    def test_reversed(self):
        x = np.arange(8.0)
        assert kendall(x, x[::-1]) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_scipy_with_ties(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            x = rng.integers(0, 6, size=60).astype(float)
            y = x + rng.integers(0, 4, size=60)
            expect = scipy.stats.kendalltau(x, y).statistic
            assert kendall(x, y) == pytest.approx(expect, abs=1e-12)

    def test_sign_agreement_with_spearman(self):
        rng = np.random.default_rng(5)
        for _ in range(15):
            x = rng.normal(size=40)
            y = rng.normal(size=40) + rng.uniform(-1, 1) * x
            if abs(spearman(x, y)) > 0.05:
                assert np.sign(kendall(x, y)) == np.sign(spearman(x, y))

    def test_all_tied_rejected(self):
        with pytest.raises(ZeroVarianceError):
            kendall([2, 2, 2, 2], [1, 2, 3, 4])

    def test_monotone_invariance_exact(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=30)
        y = rng.normal(size=30)
        assert kendall(np.exp(x), y) == kendall(x, y)
        assert kendall(x, 3.0 * y + 1.0) == kendall(x, y)


class TestRankAverage:
    def test_simple(self):
        np.testing.assert_array_equal(rank_average(np.array([3.0, 1.0, 2.0])),
                                      [3.0, 1.0, 2.0])

    def test_ties_averaged(self):
        np.testing.assert_array_equal(rank_average(np.array([1.0, 2.0, 2.0, 5.0])),
                                      [1.0, 2.5, 2.5, 4.0])


class TestCopulaEntropy:
    def test_independent_near_zero(self):
        scores = []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            scores.append(copula_entropy(rng.uniform(size=5000),
                                         rng.uniform(size=5000)))
        assert abs(np.median(scores)) <= 0.02

    @pytest.mark.parametrize("rho", [0.5, 0.9])
    def test_gaussian_closed_form(self, rho):
        expect = -0.5 * math.log(1 - rho ** 2)
        scores = []
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            z1 = rng.standard_normal(5000)
            z2 = rho * z1 + math.sqrt(1 - rho ** 2) * rng.standard_normal(5000)
            scores.append(copula_entropy(z1, z2))
        assert abs(np.median(scores) - expect) <= 0.05

    def test_monotone_transform_invariance_exact(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=400)
        y = rng.normal(size=400) + 0.7 * x
        assert copula_entropy(np.exp(x), y) == copula_entropy(x, y)

    def test_converges_to_zero_with_n(self):
        medians = []
        for n in (200, 1000, 5000):
            vals = []
            for seed in range(5):
                rng = np.random.default_rng(1000 + seed)
                vals.append(abs(copula_entropy(rng.normal(size=n),
                                               rng.normal(size=n))))
            medians.append(np.median(vals))
        assert medians[2] < medians[0]

    def test_too_small_rejected(self):
        with pytest.raises(ScreenError):
            copula_entropy(np.arange(10.0), np.arange(10.0))

    def test_k_too_large_rejected(self):
        x = np.random.default_rng(0).normal(size=60)
        with pytest.raises(ScreenError):
            copula_entropy(x, x, k=60)


class TestIncompleteBeta:
    def test_against_scipy_grid(self):
        worst = 0.0
        for a in (0.5, 1.0, 2.0, 5.0, 17.5, 120.0):
            for b in (0.5, 1.0, 3.5, 40.0, 400.0):
                for x in (0.0, 1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0):
                    mine = betainc_regularized(a, b, x)
                    ref = float(scipy.special.betainc(a, b, x))
                    worst = max(worst, abs(mine - ref))
        assert worst < 1e-10

    def test_f_tail_against_scipy(self):
        for f in (0.1, 1.0, 2.5, 10.0):
            for d1 in (1, 4, 10):
                for d2 in (5, 50, 500):
                    mine = f_sf(f, d1, d2)
                    ref = float(scipy.stats.f.sf(f, d1, d2))
                    assert mine == pytest.approx(ref, abs=1e-10)


class TestGranger:
    def test_planted_coupling_detected(self):
        rng = np.random.default_rng(7)
        n = 1000
        x = rng.standard_normal(n)
        y = np.zeros(n)
        for t in range(1, n):
            y[t] = 0.5 * y[t - 1] + 0.8 * x[t - 1] + 0.3 * rng.standard_normal()
        res = granger_test(x, y, p=2)
        assert res.p_value < 0.001
        assert res.rss_restricted >= res.rss_unrestricted >= 0.0

    def test_null_calibration(self):
        rng = np.random.default_rng(8)
        rejections = 0
        trials = 1000
        for _ in range(trials):
            x = rng.standard_normal(200)
            y = rng.standard_normal(200)
            if granger_test(x, y, p=2).p_value < 0.05:
                rejections += 1
        assert 0.03 <= rejections / trials <= 0.07

    def test_constant_x_rank_deficient(self):
        rng = np.random.default_rng(9)
        with pytest.raises(RankDeficientError):
            granger_test(np.ones(100), rng.standard_normal(100), p=2)

    def test_affine_invariance_of_f(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal(300)
        y = np.convolve(x, [0.4, 0.3], mode="full")[:300] + rng.standard_normal(300)
        base = granger_test(x, y, p=3)
        scaled = granger_test(5.0 * x - 2.0, 0.25 * y + 7.0, p=3)
        assert scaled.f_stat == pytest.approx(base.f_stat, rel=1e-9)

    def test_too_short_rejected(self):
        with pytest.raises(ScreenError):
            granger_test(np.arange(10.0), np.arange(10.0), p=3)


def planted_frame(n=2500, n_drivers=3, n_distractors=10, seed=0):
    """Target driven by lagged copies of a few features; the rest is noise."""
    rng = np.random.default_rng(seed)
    cols = {}
    drivers = []
    y = 0.2 * rng.standard_normal(n)
    for i in range(n_drivers):
        name = f"driver_{i}"
        x = np.zeros(n)
        for t in range(1, n):
            x[t] = 0.7 * x[t - 1] + rng.standard_normal()
        cols[name] = x
        y[1:] += 0.8 * x[:-1]
        drivers.append(name)
    for i in range(n_distractors):
        x = np.zeros(n)
        for t in range(1, n):
            x[t] = 0.7 * x[t - 1] + rng.standard_normal()
        cols[f"distractor_{i}"] = x
    cols["load_kw"] = y
    return pd.DataFrame(cols), drivers


class TestScreen:
    def test_planted_signal_recovery(self):
        hits = 0
        for seed in range(5):
            df, drivers = planted_frame(seed=seed)
            report = screen(df, "load_kw", lag=2)
            retained = set(report.retained_features())
            extra = retained - set(drivers)
            if set(drivers) <= retained and len(extra) <= 1:
                hits += 1
        assert hits >= 4, f"recovered drivers in only {hits}/5 seeds"

    def test_target_excluded(self):
        df, _ = planted_frame(n=600, seed=1)
        report = screen(df, "load_kw", lag=2)
        assert all(r.name != "load_kw" for r in report.rows)

    def test_alpha_zero_retains_nothing(self):
        df, _ = planted_frame(n=600, seed=2)
        report = screen(df, "load_kw", alpha=0.0, lag=2)
        assert report.retained_features() == []

    def test_constant_feature_warns_not_fails(self):
        df, _ = planted_frame(n=600, seed=3)
        df["flat"] = 1.0
        with pytest.warns(UserWarning, match="flat"):
            report = screen(df, "load_kw", lag=2)
        row = next(r for r in report.rows if r.name == "flat")
        assert not row.retained
        assert math.isnan(row.pearson)

    def test_retained_implication_invariant(self):
        df, _ = planted_frame(n=900, seed=4)
        report = screen(df, "load_kw", lag=2)
        for r in report.rows:
            if r.retained:
                assert r.granger_p < report.alpha
                assert r.ce_score >= report.ce_min

    def test_csv_schema(self, tmp_path):
        df, _ = planted_frame(n=600, seed=5)
        report = screen(df, "load_kw", lag=2)
        path = tmp_path / "screen_report.csv"
        report.to_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == ("id,name,pearson,spearman,kendall,ce_score,"
                          "granger_F,granger_p,retained")
