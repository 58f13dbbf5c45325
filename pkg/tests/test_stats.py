"""Empirical tail curves, exact intervals, KS test, attribution shares."""

import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from bigjump.stats import (
    attribution_summary,
    clopper_pearson,
    empirical_survival,
    ks_two_sample,
    ratio_diagnostic,
)


class TestClopperPearson:
    def test_edge_closed_forms(self):
        # k=0: hi solves (1-hi)^n = alpha/2; k=n: lo solves lo^n = alpha/2
        level, n = 0.95, 3
        alpha = 1.0 - level
        lo, hi = clopper_pearson(0, n, level)
        assert lo == 0.0
        assert hi == pytest.approx(1.0 - (alpha / 2.0) ** (1.0 / n), rel=1e-12)
        lo, hi = clopper_pearson(n, n, level)
        assert hi == 1.0
        assert lo == pytest.approx((alpha / 2.0) ** (1.0 / n), rel=1e-12)

    def test_interval_properties(self):
        lo, hi = clopper_pearson(3, 10, 0.95)
        assert 0.0 < lo < 0.3 < hi < 1.0
        wide_lo, wide_hi = clopper_pearson(3, 10, 0.99)
        assert wide_lo < lo and hi < wide_hi

    def test_coverage_on_known_law(self):
        # exact intervals must cover the true parameter in >= 95% of
        # seed-fixed Bernoulli(0.3) replications at level 0.95
        rng = np.random.default_rng(20240817)
        n = 40
        ks = rng.binomial(n, 0.3, size=1000)
        interval = {k: clopper_pearson(k, n, 0.95) for k in np.unique(ks)}
        covered = sum(interval[k][0] <= 0.3 <= interval[k][1] for k in ks)
        assert covered / 1000 >= 0.95

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            clopper_pearson(1, 0, 0.95)
        with pytest.raises(ValueError):
            clopper_pearson(5, 3, 0.95)
        with pytest.raises(ValueError):
            clopper_pearson(1, 3, 1.0)


class TestEmpiricalSurvival:
    def test_all_exceed(self):
        curve = empirical_survival([5, 5, 5], [4.0], level=0.95)
        assert curve.estimate[0] == 1.0
        assert curve.ci_hi[0] == 1.0
        assert curve.ci_lo[0] == pytest.approx(0.025 ** (1.0 / 3.0), rel=1e-12)

    def test_none_exceed(self):
        curve = empirical_survival([1, 2, 3], [10.0], level=0.95)
        assert curve.estimate[0] == 0.0
        assert curve.ci_lo[0] == 0.0
        assert curve.ci_hi[0] == pytest.approx(1.0 - 0.025 ** (1.0 / 3.0), rel=1e-12)

    def test_strict_exceedance_semantics(self):
        curve = empirical_survival([1.0, 2.0, 3.0], [2.0])
        assert curve.count_exceed[0] == 1  # ties at the threshold do not count

    def test_known_law_sanity(self):
        rng = np.random.default_rng(7)
        draws = rng.integers(0, 10, size=1_000_000)
        curve = empirical_survival(draws, [4.0], level=0.99)
        assert curve.ci_lo[0] <= 0.5 <= curve.ci_hi[0]
        assert curve.estimate[0] == pytest.approx(0.5, abs=0.005)

    def test_counts_non_increasing(self):
        rng = np.random.default_rng(11)
        samples = rng.exponential(size=500)
        curve = empirical_survival(samples, np.linspace(0.0, 5.0, 20))
        assert np.all(np.diff(curve.count_exceed) <= 0)
        assert np.all(curve.ci_lo <= curve.estimate)
        assert np.all(curve.estimate <= curve.ci_hi)

    def test_partial_count_merge_is_additive(self):
        # counting exceedances over a concatenation equals the sum of the
        # per-chunk counts, so parallel partial aggregation is safe
        rng = np.random.default_rng(13)
        a, b = rng.exponential(size=300), rng.exponential(size=200)
        grid = [0.5, 1.0, 2.0]
        merged = empirical_survival(np.concatenate([a, b]), grid)
        parts = [empirical_survival(chunk, grid) for chunk in (a, b)]
        assert np.array_equal(
            merged.count_exceed, parts[0].count_exceed + parts[1].count_exceed
        )

    def test_rejects_empty_and_unsorted(self):
        with pytest.raises(ValueError, match="empty sample set"):
            empirical_survival([], [1.0])
        with pytest.raises(ValueError, match="sorted"):
            empirical_survival([1, 2], [2.0, 1.0])
        with pytest.raises(ValueError, match="empty threshold grid"):
            empirical_survival([1, 2], [])


class TestRatioDiagnostic:
    def test_self_ratio_is_one(self):
        curve = empirical_survival([1, 2, 3, 4], [0.5, 1.5, 2.5])
        diag = ratio_diagnostic(curve, curve.estimate)
        assert np.allclose(diag.ratio, 1.0)
        assert np.all(diag.ratio_lo <= 1.0) and np.all(1.0 <= diag.ratio_hi)

    def test_interval_propagation(self):
        curve = empirical_survival([1, 2, 3, 4], [1.5])
        diag = ratio_diagnostic(curve, [0.25])
        assert diag.ratio[0] == pytest.approx(3.0)  # 3 of 4 exceed 1.5
        assert diag.ratio_lo[0] == pytest.approx(curve.ci_lo[0] / 0.25)
        assert diag.ratio_hi[0] == pytest.approx(curve.ci_hi[0] / 0.25)

    def test_scalar_predictor_broadcasts(self):
        curve = empirical_survival([1, 2, 3, 4], [0.5, 1.5])
        diag = ratio_diagnostic(curve, 0.5)
        assert diag.predictor.shape == curve.xs.shape

    def test_rejects_zero_predictor(self):
        curve = empirical_survival([1, 2, 3], [1.5, 2.5])
        with pytest.raises(ValueError, match="positive"):
            ratio_diagnostic(curve, [0.5, 0.0])


class TestKsTwoSample:
    def test_identical_samples(self):
        a = np.arange(100.0)
        stat, critical, reject = ks_two_sample(a, a.copy())
        assert stat == 0.0
        assert not reject

    def test_disjoint_supports(self):
        stat, _, reject = ks_two_sample([0.0] * 50, [1.0] * 50)
        assert stat == 1.0
        assert reject

    def test_critical_value_formula(self):
        m = n = 10**5
        _, critical, _ = ks_two_sample(np.zeros(m), np.zeros(n), alpha=0.01)
        c = math.sqrt(-math.log(0.005) / 2.0)
        assert c == pytest.approx(1.6276, abs=5e-5)
        assert critical == pytest.approx(c * math.sqrt(2.0 / 10**5), rel=1e-12)

    def test_statistic_matches_scipy(self):
        rng = np.random.default_rng(23)
        a = rng.normal(size=403)
        b = rng.normal(0.1, size=517)
        stat, _, _ = ks_two_sample(a, b)
        assert stat == pytest.approx(ks_2samp(a, b).statistic, rel=1e-12)

    def test_same_law_accepts_shifted_law_rejects(self):
        rng = np.random.default_rng(29)
        a = rng.uniform(size=3000)
        b = rng.uniform(size=3000)
        _, _, reject = ks_two_sample(a, b, alpha=0.01)
        assert not reject
        _, _, reject = ks_two_sample(a, b + 0.2, alpha=0.01)
        assert reject

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="nonempty"):
            ks_two_sample([], [1.0])


class TestAttributionSummary:
    def test_single_label(self):
        summary = attribution_summary([("immigration", True)] * 5)
        assert summary.shares == {"immigration": 1.0}
        assert summary.dominant_share == 1.0

    def test_mixed_labels_and_dominance(self):
        records = [
            ("immigration", True),
            ("gen 1", True),
            ("gen 1", False),
            ("gen 2", False),
        ]
        summary = attribution_summary(records)
        assert summary.total == 4
        assert summary.counts == {"immigration": 1, "gen 1": 2, "gen 2": 1}
        assert summary.shares["gen 1"] == 0.5
        assert summary.dominant_share == 0.5

    def test_accepts_attribute_records(self):
        class Record:
            def __init__(self, label, dominant):
                self.label = label
                self.dominant = dominant

        summary = attribution_summary([Record("gen 3", True)])
        assert summary.counts == {"gen 3": 1}

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="no attributions"):
            attribution_summary([])
