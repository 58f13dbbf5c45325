"""Estimation and hypothesis machinery for simulation output.

Empirical survival curves carry exact (Clopper–Pearson) binomial confidence
intervals rather than normal approximations: tail exceedance counts are tiny
by design, and exactness at small counts is what makes the diagnostics
trustworthy.  Cross-method agreement is checked with a two-sample
Kolmogorov–Smirnov test (no binning decisions), and exceedance attributions
are reduced to per-label shares.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import beta as _beta_dist

__all__ = [
    "TailCurve",
    "RatioDiagnostic",
    "AttributionSummary",
    "clopper_pearson",
    "empirical_survival",
    "ratio_diagnostic",
    "ks_two_sample",
    "attribution_summary",
]


def clopper_pearson(k: int, n: int, level: float) -> tuple[float, float]:
    """Exact two-sided binomial confidence interval for k successes in n trials.

    Returns (lo, hi) such that the interval covers the true success
    probability with probability at least ``level``.  The endpoints are the
    usual beta quantiles, with the k=0 and k=n edges closed in the standard
    one-sided way (lo=0 and hi=1 respectively).
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level out of range (0, 1): {level}")
    if n < 1:
        raise ValueError(f"need at least one trial, got n={n}")
    if not 0 <= k <= n:
        raise ValueError(f"success count out of range [0, {n}]: {k}")
    alpha = 1.0 - level
    lo = 0.0 if k == 0 else float(_beta_dist.ppf(alpha / 2.0, k, n - k + 1))
    hi = 1.0 if k == n else float(_beta_dist.ppf(1.0 - alpha / 2.0, k + 1, n - k))
    return lo, hi


@dataclass(frozen=True, eq=False)
class TailCurve:
    """Empirical survival estimates on a threshold grid with exact intervals.

    ``count_exceed[i]`` counts samples strictly above ``xs[i]``; the point
    estimate is ``count_exceed / n_total``.  Intervals are exact
    Clopper–Pearson at confidence ``level``.
    """

    xs: np.ndarray
    count_exceed: np.ndarray
    n_total: int
    level: float
    ci_lo: np.ndarray
    ci_hi: np.ndarray

    def __post_init__(self) -> None:
        if self.n_total < 1:
            raise ValueError("empty sample set")
        if np.any(np.diff(self.count_exceed) > 0):
            raise ValueError("exceedance counts must be non-increasing in x")
        est = self.estimate
        if np.any(self.ci_lo > est) or np.any(est > self.ci_hi):
            raise ValueError("confidence interval must bracket the estimate")

    @property
    def estimate(self) -> np.ndarray:
        return self.count_exceed / self.n_total


def empirical_survival(
    samples: Sequence[float] | np.ndarray,
    xs: Sequence[float] | np.ndarray,
    level: float = 0.99,
) -> TailCurve:
    """Estimate P(sample > x) on a sorted grid in one pass over sorted data."""
    values = np.sort(np.asarray(samples, dtype=float))
    n = values.size
    if n < 1:
        raise ValueError("empty sample set")
    grid = np.asarray(xs, dtype=float)
    if grid.size < 1:
        raise ValueError("empty threshold grid")
    if np.any(np.diff(grid) < 0):
        raise ValueError("threshold grid must be sorted ascending")
    counts = n - np.searchsorted(values, grid, side="right")
    bounds = [clopper_pearson(int(k), n, level) for k in counts]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    for arr in (grid, counts, lo, hi):
        arr.setflags(write=False)
    return TailCurve(
        xs=grid, count_exceed=counts, n_total=n, level=level, ci_lo=lo, ci_hi=hi
    )


@dataclass(frozen=True, eq=False)
class RatioDiagnostic:
    """Estimate-to-prediction ratios with the interval endpoints propagated."""

    xs: np.ndarray
    estimate: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    predictor: np.ndarray
    ratio: np.ndarray
    ratio_lo: np.ndarray
    ratio_hi: np.ndarray


def ratio_diagnostic(
    curve: TailCurve, predictor: Sequence[float] | np.ndarray
) -> RatioDiagnostic:
    """Divide a tail curve (estimate and interval) by a positive prediction.

    ``predictor`` holds the predicted survival at each grid point of
    ``curve``; a ratio near 1 with the interval straddling 1 means the
    prediction is consistent with the data at that threshold.
    """
    pred = np.broadcast_to(
        np.asarray(predictor, dtype=float), curve.xs.shape
    ).copy()
    if np.any(pred <= 0.0) or not np.all(np.isfinite(pred)):
        bad = pred[~(np.isfinite(pred) & (pred > 0.0))][0]
        raise ValueError(f"predictor must be finite and positive, got {bad}")
    pred.setflags(write=False)
    ratio = curve.estimate / pred
    ratio_lo = curve.ci_lo / pred
    ratio_hi = curve.ci_hi / pred
    for arr in (ratio, ratio_lo, ratio_hi):
        arr.setflags(write=False)
    return RatioDiagnostic(
        xs=curve.xs,
        estimate=curve.estimate,
        ci_lo=curve.ci_lo,
        ci_hi=curve.ci_hi,
        predictor=pred,
        ratio=ratio,
        ratio_lo=ratio_lo,
        ratio_hi=ratio_hi,
    )


def ks_two_sample(
    a_samples: Sequence[float] | np.ndarray,
    b_samples: Sequence[float] | np.ndarray,
    alpha: float = 0.01,
) -> tuple[float, float, bool]:
    """Two-sample Kolmogorov–Smirnov test at asymptotic level ``alpha``.

    Returns (statistic, critical, reject) where the statistic is the sup
    distance between the two empirical CDFs and the critical value is
    c(alpha) * sqrt((m+n)/(m*n)) with c(alpha) = sqrt(-ln(alpha/2)/2).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha out of range (0, 1): {alpha}")
    a = np.sort(np.asarray(a_samples, dtype=float))
    b = np.sort(np.asarray(b_samples, dtype=float))
    m, n = a.size, b.size
    if m < 1 or n < 1:
        raise ValueError("both sample sets must be nonempty")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / m
    cdf_b = np.searchsorted(b, pooled, side="right") / n
    statistic = float(np.max(np.abs(cdf_a - cdf_b)))
    c_alpha = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    critical = c_alpha * math.sqrt((m + n) / (m * n))
    return statistic, critical, statistic > critical


@dataclass(frozen=True)
class AttributionSummary:
    """Per-label exceedance counts and the single-component dominance rate."""

    counts: dict[str, int]
    total: int
    dominant_share: float

    @property
    def shares(self) -> dict[str, float]:
        return {label: k / self.total for label, k in self.counts.items()}


def attribution_summary(attributions: Iterable) -> AttributionSummary:
    """Aggregate exceedance attributions into label shares.

    Accepts any iterable of records carrying a ``label`` and ``dominant``
    attribute (or bare ``(label, dominant)`` pairs).
    """
    counts: Counter[str] = Counter()
    dominant = 0
    total = 0
    for item in attributions:
        if isinstance(item, tuple):
            label, is_dominant = item
        else:
            label, is_dominant = item.label, item.dominant
        counts[str(label)] += 1
        dominant += bool(is_dominant)
        total += 1
    if total == 0:
        raise ValueError("no attributions to summarize")
    return AttributionSummary(
        counts=dict(counts), total=total, dominant_share=dominant / total
    )
