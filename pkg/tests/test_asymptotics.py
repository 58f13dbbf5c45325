"""Closed-form predictors: identities, two-scale refinement, summability sums.

Golden values computed independently with mpmath at 40 digits and frozen.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bigjump.asymptotics import (
    _series_partial_sums,
    a_tail_sums,
    correction_sum,
    decomposition_pred,
    generation_tail_pred,
    leading_tail,
    per_generation_pred,
    prediction_table,
    second_scale,
    second_scale_positivity_threshold,
    second_scale_series,
    series_identities,
    two_scale_total,
)
from bigjump.model import calibrate, survival_A, survival_B, truncated_mean_A

GOLDEN_SECOND_SCALE_E12 = 4.010642471002143e-07  # at b=0.5, eps=1, x=e^12
GOLDEN_SS_OVER_LEADING_1E3 = 0.047899205598643161
GOLDEN_PER_GEN_1_10 = 0.056427575419355575
GOLDEN_A_TAIL_EXACT_4 = 0.23116644701511088
GOLDEN_CORRECTION_1E3_X = 0.16976307019858192  # correction_sum(1e3) * 1e3
GOLDEN_DECOMP_OVER_TWOSCALE_1E4 = 1.0200968409134596


class TestLeadingTail:
    def test_exact_values(self, params):
        assert leading_tail(params, 999) == pytest.approx(0.002, rel=1e-15)

    def test_small_b_limit_matches_immigration_tail(self):
        tiny = calibrate(1e-6, 1.0)
        x = np.array([5.0, 50.0, 500.0])
        assert np.allclose(leading_tail(tiny, x), 1.0 / (1.0 + x), rtol=2e-6)

    def test_formula_value_at_small_x(self):
        steep = calibrate(0.9, 1.0)
        assert leading_tail(steep, 9) == pytest.approx(1.0, rel=1e-14)

    def test_rejects_negative(self, params):
        with pytest.raises(ValueError):
            leading_tail(params, -1.0)


class TestSeriesIdentities:
    def test_closed_forms(self):
        assert series_identities(0.5) == (4.0, 12.0)
        s1, s2 = series_identities(0.2)
        assert s1 == pytest.approx(1.5625, rel=1e-15)
        assert s2 == pytest.approx(2.34375, rel=1e-15)
        s1, s2 = series_identities(0.8)
        assert s1 == pytest.approx(25.0, rel=1e-12)
        assert s2 == pytest.approx(225.0, rel=1e-12)

    def test_partial_sums_match_closed_forms(self):
        for b in (0.2, 0.5, 0.8):
            n1, n2 = _series_partial_sums(b, n_terms=400)
            assert n1 == pytest.approx(1.0 / (1.0 - b) ** 2, rel=1e-10)
            assert n2 == pytest.approx((1.0 + b) / (1.0 - b) ** 3, rel=1e-10)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            series_identities(1.0)
        with pytest.raises(ValueError):
            series_identities(0.0)


class TestSecondScale:
    def test_golden_at_e12(self, params):
        assert second_scale(params, math.exp(12.0)) == pytest.approx(
            GOLDEN_SECOND_SCALE_E12, rel=1e-13
        )

    def test_golden_ratio_to_leading(self, params):
        ratio = second_scale(params, 1e3) / leading_tail(params, 1e3)
        assert ratio == pytest.approx(GOLDEN_SS_OVER_LEADING_1E3, rel=1e-13)
        assert 0.0 < ratio < 0.5

    def test_series_cross_check(self, params):
        for x in (1e2, 1e3, 1e6, 1e10):
            closed = second_scale(params, x)
            direct = second_scale_series(params, x)
            assert direct == pytest.approx(closed, rel=1e-10)

    def test_two_scale_total_is_sum(self, params):
        x = np.array([100.0, 1000.0, 1e6])
        assert np.array_equal(
            two_scale_total(params, x),
            leading_tail(params, x) + second_scale(params, x),
        )

    def test_rejects_x_at_most_one(self, params):
        with pytest.raises(ValueError):
            second_scale(params, 1.0)
        with pytest.raises(ValueError):
            second_scale_series(params, 0.5)

    def test_positivity_threshold(self, params):
        assert second_scale_positivity_threshold(params) == pytest.approx(
            8.0, rel=1e-14
        )
        assert second_scale(params, 7.9) < 0 < second_scale(params, 8.1)

    def test_decay_monotone_on_doubling_grid(self, params):
        # (1+x) * second_scale(x) strictly decreasing over [1e4, ~1e12]
        xs = 1e4 * 2.0 ** np.arange(0, 28)
        vals = second_scale(params, xs) * (1.0 + xs)
        assert np.all(np.diff(vals) < 0)

    def test_ratio_to_leading_vanishes(self, params):
        xs = 1e4 * 2.0 ** np.arange(0, 28)
        ratios = second_scale(params, xs) / leading_tail(params, xs)
        assert np.all(np.diff(ratios) < 0)
        assert ratios[-1] < 0.05


class TestGenerationTailPred:
    def test_first_generation_is_offspring_tail(self, params):
        for x in (10, 100, 2**13):
            assert generation_tail_pred(params, 1, x) == survival_B(params, x)

    def test_second_generation_at_half(self, params):
        # 2 * b = 1 at b = 0.5
        assert generation_tail_pred(params, 2, 100) == pytest.approx(
            survival_B(params, 100), rel=1e-15
        )

    def test_rejects_bad_n(self, params):
        with pytest.raises(ValueError):
            generation_tail_pred(params, 0, 10)


class TestPerGenerationPred:
    def test_golden(self, params):
        assert per_generation_pred(params, 1, 10.0) == pytest.approx(
            GOLDEN_PER_GEN_1_10, rel=1e-13
        )

    def test_structural_decomposition(self, params):
        # the prediction is (truncated mean) * (jump tail) + (batch tail)
        x = 50.0
        expected = truncated_mean_A(2 * x) * survival_B(params, x) + survival_A(2 * x)
        assert per_generation_pred(params, 1, x) == pytest.approx(expected, rel=1e-14)

    def test_at_zero_threshold(self, params):
        assert per_generation_pred(params, 3, 0.0) == 1.0

    def test_rejects_bad_args(self, params):
        with pytest.raises(ValueError):
            per_generation_pred(params, 0, 10.0)
        with pytest.raises(ValueError):
            per_generation_pred(params, 1, -1.0)


class TestATailSums:
    def test_golden_small_x(self, params):
        exact, asym = a_tail_sums(params, 4.0)
        assert exact == pytest.approx(GOLDEN_A_TAIL_EXACT_4, rel=1e-14)
        assert asym == 0.25  # b/(1-b) = 1 at b = 0.5

    def test_within_two_percent_at_desk_scale(self, params, params_b02, params_b08):
        for p in (params_b02, params, params_b08):
            exact, asym = a_tail_sums(p, 1e6)
            assert exact / asym == pytest.approx(1.0, abs=0.02)

    def test_exact_below_asymptote(self, params):
        # 1/(1+floor(y)) <= 1/y for every y > 0, term by term
        for x in (0.5, 3.0, 17.0, 1e4):
            exact, asym = a_tail_sums(params, x)
            assert exact <= asym

    def test_rejects_nonpositive(self, params):
        with pytest.raises(ValueError):
            a_tail_sums(params, 0.0)


class TestCorrectionSum:
    def test_golden(self, params):
        value = correction_sum(params, 1e3) * 1e3
        assert value == pytest.approx(GOLDEN_CORRECTION_1E3_X, rel=1e-13)
        assert value < 1.0

    def test_strictly_decreasing_over_decades(self, params):
        vals = [correction_sum(params, float(10**k)) * 10**k for k in range(3, 7)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_first_term_dominates_from_below(self, params):
        x = 100.0
        first = truncated_mean_A(2 * x) * survival_B(params, x)
        assert correction_sum(params, x) >= first

    def test_rejects_small_x(self, params):
        with pytest.raises(ValueError):
            correction_sum(params, 1.0)


class TestDecompositionPred:
    def test_agrees_with_two_scale_at_desk_scale(self, params):
        ratio = decomposition_pred(params, 1e4) / two_scale_total(params, 1e4)
        assert ratio == pytest.approx(GOLDEN_DECOMP_OVER_TWOSCALE_1E4, rel=1e-12)
        assert 0.95 <= ratio <= 1.05

    def test_five_percent_band_above_1e4(self, params):
        for x in (1e4, 1e5, 1e6):
            ratio = decomposition_pred(params, x) / two_scale_total(params, x)
            assert abs(ratio - 1.0) <= 0.05

    def test_formula_value_at_zero(self, params):
        assert decomposition_pred(params, 0.0) >= 1.0

    def test_explicit_depth_cap(self, params):
        shallow = decomposition_pred(params, 1e4, n_max=3)
        deep = decomposition_pred(params, 1e4, n_max=80)
        assert shallow < deep
        assert deep == pytest.approx(decomposition_pred(params, 1e4), rel=1e-12)


class TestPredictionTable:
    def test_builds_and_is_consistent(self, params):
        xs = [10.0, 100.0, 1000.0, 1e4]
        table = prediction_table(params, xs, n_max=4)
        assert table.gen_count == 4
        assert table.per_gen.shape == (4, 4)
        assert np.array_equal(
            table.two_scale_total, table.leading + table.second_scale
        )
        exact, asym = a_tail_sums(params, 100.0)
        assert table.a_tail_exact[1] == exact
        assert table.a_tail_asym[1] == asym
        assert per_generation_pred(params, 2, 1000.0) == table.per_gen[2, 1]

    def test_all_entries_nonnegative(self, params):
        table = prediction_table(params, [10.0, 1e3, 1e6], n_max=6)
        for field in (
            table.leading,
            table.second_scale,
            table.two_scale_total,
            table.per_gen,
            table.a_tail_exact,
            table.a_tail_asym,
        ):
            assert np.all(field >= 0)

    def test_rejects_grid_below_positivity_threshold(self, params):
        with pytest.raises(ValueError, match="positivity threshold"):
            prediction_table(params, [5.0, 100.0])

    def test_rejects_unsorted_grid(self, params):
        with pytest.raises(ValueError, match="strictly increasing"):
            prediction_table(params, [100.0, 10.0])

    def test_rejects_empty_or_bad_nmax(self, params):
        with pytest.raises(ValueError):
            prediction_table(params, [])
        with pytest.raises(ValueError):
            prediction_table(params, [10.0], n_max=0)


class TestProperties:
    @given(st.floats(min_value=10.0, max_value=1e12))
    @settings(max_examples=100, deadline=None)
    def test_exact_a_tail_below_asymptote(self, x):
        params = calibrate(0.5, 1.0)
        exact, asym = a_tail_sums(params, x)
        assert 0.0 < exact <= asym

    @given(
        st.integers(min_value=1, max_value=30),
        st.floats(min_value=0.0, max_value=1e9),
    )
    @settings(max_examples=100, deadline=None)
    def test_per_generation_pred_nonnegative(self, n, x):
        params = calibrate(0.5, 1.0)
        assert per_generation_pred(params, n, x) >= 0.0

    @given(st.floats(min_value=0.0, max_value=1e15))
    @settings(max_examples=100, deadline=None)
    def test_leading_tail_decreasing(self, x):
        params = calibrate(0.5, 1.0)
        assert leading_tail(params, x) > leading_tail(params, x + 1.0)
