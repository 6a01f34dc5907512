import math

import numpy as np
import pytest

from simo_prelog.capacity import (
    MiEstimate,
    ResourceBudgetError,
    cond_entropy_rate_mc,
    mi_rate_mc,
    prelog_slope_fit,
    snr_db_to_linear,
    upper_bound_rate,
)
from simo_prelog.model import ChannelConfig, make_random_covariance

LOG2_10 = math.log2(10.0)


def _pair(n, q, m, seed=3):
    return make_random_covariance(n, q, seed=seed), ChannelConfig(n, q, m)


def _point(snr_db, mi):
    return MiEstimate(snr_db=snr_db, mi_bits_per_cu=mi, std_err=0.0, outer=100, inner=1000, seed=0)


class TestSnrConversion:
    def test_values(self):
        assert snr_db_to_linear(0.0) == 1.0
        assert np.isclose(snr_db_to_linear(30.0), 1000.0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            snr_db_to_linear(float("nan"))
        with pytest.raises(ValueError):
            snr_db_to_linear(float("inf"))


class TestCondEntropy:
    def test_zero_snr_limit(self):
        factor, cfg = _pair(3, 2, 2)
        want = 2 * 3 * math.log2(math.pi * math.e)
        got = cond_entropy_rate_mc(factor, cfg, snr_db=-300.0, trials=200, seed=0)
        assert abs(got - want) < 1e-6

    def test_high_snr_slope_is_mq(self):
        factor, cfg = _pair(3, 2, 2)
        h30 = cond_entropy_rate_mc(factor, cfg, 30.0, trials=10**4, seed=1)
        h40 = cond_entropy_rate_mc(factor, cfg, 40.0, trials=10**4, seed=1)
        slope = (h40 - h30) / LOG2_10
        assert abs(slope - 4.0) < 0.1

    def test_linearity_in_antennas(self):
        factor, _ = _pair(4, 2, 1)
        base = 4 * math.log2(math.pi * math.e)
        per_antenna = None
        for m in (1, 2, 5):
            cfg = ChannelConfig(4, 2, m)
            v = (cond_entropy_rate_mc(factor, cfg, 20.0, trials=500, seed=2) - m * base) / m
            if per_antenna is None:
                per_antenna = v
            assert np.isclose(v, per_antenna, rtol=1e-13)

    def test_worker_independence(self):
        factor, cfg = _pair(3, 2, 2)
        a = cond_entropy_rate_mc(factor, cfg, 20.0, trials=30000, seed=0, workers=1)
        b = cond_entropy_rate_mc(factor, cfg, 20.0, trials=30000, seed=0, workers=4)
        assert a == b

    def test_minimum_trials(self):
        factor, cfg = _pair(3, 2, 2)
        with pytest.raises(ValueError):
            cond_entropy_rate_mc(factor, cfg, 10.0, trials=50, seed=0)


class TestUpperBound:
    def test_formula_value(self):
        factor, cfg = _pair(3, 2, 2)
        snr_db = 10.0 * math.log10(2.0**10)
        want = (2.0 / 3.0) * 10.0 + (2.0 / 3.0) * math.log2(10.0)
        assert abs(upper_bound_rate(factor, cfg, snr_db) - want) < 1e-12

    def test_slope_decomposes_into_antenna_term_plus_loglog(self):
        # OLS is linear, so the fitted slope of the two-term curve equals the
        # antenna term plus the fitted slope of the loglog term alone.
        factor, cfg = _pair(3, 2, 2)
        grid = (30.0, 40.0, 50.0, 60.0)
        pts = [_point(db, upper_bound_rate(factor, cfg, db)) for db in grid]
        fit = prelog_slope_fit(pts)
        loglog = [_point(db, (2.0 / 3.0) * math.log2(db * LOG2_10 / 10.0)) for db in grid]
        excess = prelog_slope_fit(loglog).slope
        assert abs(fit.slope - (2.0 / 3.0 + excess)) < 1e-10
        # The curve is concave in log2(rho), so the fitted slope sits between
        # the derivative at the window edges: 2/3 + (2/3)/(ln2 * log2(rho)).
        lo = 2.0 / 3.0 + (2.0 / 3.0) / (math.log(2.0) * 6.0 * LOG2_10)
        hi = 2.0 / 3.0 + (2.0 / 3.0) / (math.log(2.0) * 3.0 * LOG2_10)
        assert lo < fit.slope < hi

    def test_slope_approaches_antenna_term_asymptotically(self):
        factor, cfg = _pair(3, 2, 2)
        pts = [
            _point(db, upper_bound_rate(factor, cfg, db))
            for db in (300.0, 320.0, 340.0, 360.0)
        ]
        fit = prelog_slope_fit(pts)
        assert abs(fit.slope - 2.0 / 3.0) < 0.02

    def test_full_rank_curve_flattens(self):
        # Q = N kills the linear term; only the loglog term remains, and its
        # slope decays toward zero as SNR grows.
        factor, cfg = _pair(4, 4, 2)
        r50 = upper_bound_rate(factor, cfg, 50.0)
        r60 = upper_bound_rate(factor, cfg, 60.0)
        assert abs((r60 - r50) - math.log2(6.0 / 5.0)) < 1e-12

        def pair_slope(db_lo, db_hi):
            lo = upper_bound_rate(factor, cfg, db_lo)
            hi = upper_bound_rate(factor, cfg, db_hi)
            return (hi - lo) / ((db_hi - db_lo) / 10.0 * LOG2_10)

        s_mid = pair_slope(50.0, 60.0)
        s_high = pair_slope(100.0, 110.0)
        s_top = pair_slope(300.0, 310.0)
        assert 0 < s_top < s_high < s_mid < 0.1
        assert s_top < 0.02

    def test_rejects_snr_at_or_below_e(self):
        factor, cfg = _pair(3, 2, 2)
        with pytest.raises(ValueError):
            upper_bound_rate(factor, cfg, 4.0)
        upper_bound_rate(factor, cfg, 5.0)


class TestMiRate:
    def test_zero_snr_mi_vanishes(self):
        factor, cfg = _pair(3, 2, 2)
        est = mi_rate_mc(factor, cfg, -60.0, outer=100, inner=1000, seed=0)
        assert est.mi_bits_per_cu >= -3 * est.std_err
        assert abs(est.mi_bits_per_cu) <= 3 * est.std_err + 1e-3

    def test_nonnegative_within_error_bars(self):
        factor, cfg = _pair(3, 2, 2)
        for snr_db in (0.0, 10.0):
            est = mi_rate_mc(factor, cfg, snr_db, outer=100, inner=1000, seed=1)
            assert est.mi_bits_per_cu >= -3 * est.std_err

    def test_monotone_in_snr(self):
        factor, cfg = _pair(3, 2, 2)
        ests = [mi_rate_mc(factor, cfg, db, outer=200, inner=2000, seed=5) for db in (10, 20, 30)]
        for lo, hi in zip(ests, ests[1:]):
            assert hi.mi_bits_per_cu - lo.mi_bits_per_cu > lo.std_err + hi.std_err

    def test_worker_independence(self):
        factor, cfg = _pair(3, 2, 2)
        a = mi_rate_mc(factor, cfg, 10.0, outer=100, inner=1000, seed=0, workers=1)
        b = mi_rate_mc(factor, cfg, 10.0, outer=100, inner=1000, seed=0, workers=3)
        assert a.mi_bits_per_cu == b.mi_bits_per_cu
        assert a.std_err == b.std_err

    def test_bias_controlled_in_valid_regime(self):
        # fresh-mixture density estimates are biased low in h(y); quadrupling
        # the mixture size at moderate snr must move the estimate by less
        # than two standard errors
        factor, cfg = _pair(3, 2, 2)
        a = mi_rate_mc(factor, cfg, 5.0, outer=200, inner=1000, seed=7)
        b = mi_rate_mc(factor, cfg, 5.0, outer=200, inner=4000, seed=7)
        assert abs(a.mi_bits_per_cu - b.mi_bits_per_cu) < 2.0 * max(a.std_err, b.std_err)

    def test_sample_count_preconditions(self):
        factor, cfg = _pair(3, 2, 2)
        with pytest.raises(ValueError):
            mi_rate_mc(factor, cfg, 10.0, outer=50, inner=1000, seed=0)
        with pytest.raises(ValueError):
            mi_rate_mc(factor, cfg, 10.0, outer=100, inner=500, seed=0)

    def test_budget_guard(self):
        factor, cfg = _pair(3, 2, 2)
        with pytest.raises(ResourceBudgetError):
            mi_rate_mc(factor, cfg, 10.0, outer=100, inner=1000, seed=0, max_evals=10**4)


class TestSlopeFit:
    def test_exact_line(self):
        pts = [_point(db, 0.5 * db * LOG2_10 / 10.0 + 1.0) for db in (10, 20, 30, 40)]
        fit = prelog_slope_fit(pts)
        assert np.isclose(fit.slope, 0.5)
        assert np.isclose(fit.intercept, 1.0)
        assert np.isclose(fit.r_squared, 1.0)
        assert fit.window_db == (10.0, 40.0)

    def test_constant_points(self):
        fit = prelog_slope_fit([_point(db, 2.0) for db in (10, 20, 30)])
        assert fit.slope == 0.0

    def test_requires_three_points(self):
        with pytest.raises(ValueError):
            prelog_slope_fit([_point(10, 1.0), _point(20, 2.0)])

    def test_rejects_duplicate_snr(self):
        with pytest.raises(ValueError):
            prelog_slope_fit([_point(10, 1.0), _point(10, 2.0), _point(20, 3.0)])

    def test_estimate_invariants(self):
        with pytest.raises(ValueError):
            MiEstimate(snr_db=0.0, mi_bits_per_cu=1.0, std_err=0.1, outer=0, inner=1000, seed=0)
        with pytest.raises(ValueError):
            MiEstimate(snr_db=0.0, mi_bits_per_cu=1.0, std_err=-0.1, outer=10, inner=1000, seed=0)
