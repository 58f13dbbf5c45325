"""Closed-form tail predictors for the stationary branching fixed point.

Every limit statement about the stationary law ``X`` of

    X =d A + B_1 + ... + B_X

gets a concrete finite-x evaluator here: the leading tail
``1/((1-b)(1+x))``, its two-scale refinement carrying the slowly varying
second term, per-generation single-big-jump predictions, and the
summability sums that control the error terms.  Everything is a pure
function of calibrated :class:`~bigjump.model.ModelParams`; no sampling
and no pmf arithmetic happens in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bigjump.model import (
    ModelParams,
    slowly_varying_part,
    survival_A,
    survival_B,
    truncated_mean_A,
)

__all__ = [
    "PredictionTable",
    "leading_tail",
    "series_identities",
    "second_scale",
    "second_scale_series",
    "two_scale_total",
    "generation_tail_pred",
    "per_generation_pred",
    "a_tail_sums",
    "correction_sum",
    "decomposition_pred",
    "second_scale_positivity_threshold",
    "prediction_table",
]


# ---------------------------------------------------------------------------
# Power-series identities
# ---------------------------------------------------------------------------


def _series_partial_sums(b: float, n_terms: int | None = None) -> tuple[float, float]:
    """Numeric partial sums of ``sum n b^(n-1)`` and ``sum n^2 b^(n-1)``.

    With ``n_terms=None`` the count adapts until the next term drops below
    1e-18, so the partial sums agree with the closed forms to machine level.
    """
    if n_terms is None:
        n_terms = 400
        while n_terms**2 * b ** (n_terms - 1) > 1e-18 and n_terms < (1 << 24):
            n_terms *= 2
    n = np.arange(1, n_terms + 1, dtype=np.float64)
    weights = b ** (n - 1.0)
    return float(np.sum(n * weights)), float(np.sum(n * n * weights))


def series_identities(b: float) -> tuple[float, float]:
    """Closed forms ``s1 = 1/(1-b)^2`` and ``s2 = (1+b)/(1-b)^3``.

    These are ``sum_{n>=1} n b^(n-1)`` and ``sum_{n>=1} n^2 b^(n-1)``.
    The numeric partial sums are evaluated as a self-test and must agree
    with the closed forms to 1e-10 relative, else the call fails.
    """
    if not 0.0 < b < 1.0:
        raise ValueError(f"b out of range: {b!r} (need 0 < b < 1)")
    s1 = 1.0 / (1.0 - b) ** 2
    s2 = (1.0 + b) / (1.0 - b) ** 3
    n1, n2 = _series_partial_sums(b)
    if abs(n1 - s1) > 1e-10 * s1 or abs(n2 - s2) > 1e-10 * s2:
        raise RuntimeError(
            f"series self-test failed at b={b}: partial sums ({n1}, {n2}) "
            f"vs closed forms ({s1}, {s2})"
        )
    return s1, s2


# ---------------------------------------------------------------------------
# Leading tail and its two-scale refinement
# ---------------------------------------------------------------------------


def leading_tail(params: ModelParams, x):
    """First-order stationary tail ``1/((1-b)(1+x))``.

    The immigration tail ``1/(1+x)`` amplified by the geometric cascade
    ``1 + b + b^2 + ... = 1/(1-b)``.  Valid asymptotically; at small ``x``
    it is a formula value, not a probability (it may exceed 1).
    """
    x_arr = np.asarray(x, dtype=np.float64)
    if np.any(x_arr < 0):
        raise ValueError("x must be >= 0")
    out = 1.0 / ((1.0 - params.b) * (1.0 + x_arr))
    return float(out) if out.ndim == 0 else out


def second_scale(params: ModelParams, x):
    """Second-order tail term ``[log(x)*s1 - log(1/b)*s2] * L(x)/(1+x)``.

    ``s1, s2`` are the power-series constants and ``L`` the slowly varying
    part of the offspring tail.  The coefficient is negative below
    ``x = exp(log(1/b)*s2/s1)`` (about 8.0 at b = 0.5); the asymptotic
    regime, and every consumer in this package, lives above it.

    Raises:
        ValueError: for ``x <= 1`` (the log scale is meaningless there).
    """
    x_arr = np.asarray(x, dtype=np.float64)
    if np.any(x_arr <= 1.0):
        raise ValueError("x must be > 1")
    b = params.b
    s1 = 1.0 / (1.0 - b) ** 2
    s2 = (1.0 + b) / (1.0 - b) ** 3
    coeff = np.log(x_arr) * s1 - math.log(1.0 / b) * s2
    out = coeff * slowly_varying_part(params, x_arr) / (1.0 + x_arr)
    return float(out) if out.ndim == 0 else out


def second_scale_series(params: ModelParams, x) -> float:
    """Direct series evaluation of the two-scale coefficient.

    Sums ``n * b^(n-1) * (log x - n*log(1/b))`` until terms fall below
    1e-16, then multiplies by ``L(x)/(1+x)``; agrees with the closed-form
    :func:`second_scale` to 1e-10.
    """
    x = float(x)
    if x <= 1.0:
        raise ValueError("x must be > 1")
    b = params.b
    n_terms = 400
    while n_terms**2 * b ** (n_terms - 1) > 1e-16 and n_terms < (1 << 24):
        n_terms *= 2
    n = np.arange(1, n_terms + 1, dtype=np.float64)
    coeff = float(np.sum(n * b ** (n - 1.0) * (math.log(x) - n * math.log(1.0 / b))))
    return coeff * slowly_varying_part(params, x) / (1.0 + x)


def two_scale_total(params: ModelParams, x):
    """Leading tail plus the second-scale refinement."""
    return leading_tail(params, x) + second_scale(params, x)


def second_scale_positivity_threshold(params: ModelParams) -> float:
    """Smallest ``x`` at which the second-scale coefficient is nonnegative:
    ``exp(log(1/b) * s2/s1)``."""
    b = params.b
    return math.exp(math.log(1.0 / b) * (1.0 + b) / (1.0 - b))


# ---------------------------------------------------------------------------
# Per-generation predictions
# ---------------------------------------------------------------------------


def generation_tail_pred(params: ModelParams, n: int, x) -> float:
    """Generation-``n`` aggregate tail prediction ``n * b^(n-1) * P(B > x)``.

    A generation-``n`` subtree exceeds a high level when exactly one of its
    roughly ``n`` ancestral individuals takes one big offspring jump, each
    with mean multiplicity ``b^(n-1)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return n * params.b ** (n - 1) * survival_B(params, x)


def per_generation_pred(params: ModelParams, n: int, x: float) -> float:
    """Tail prediction for one cluster term (an A-sized batch of D_n copies):

        E[A; A <= x*b^-n] * n * b^(n-1) * P(B > x)  +  P(A > x*b^-n).

    Either one subtree jumps while the immigration batch stays moderate, or
    the batch itself is huge.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if x < 0:
        raise ValueError("x must be >= 0")
    scale = float(x) * params.b ** (-n)
    jump = truncated_mean_A(scale) * n * params.b ** (n - 1) * survival_B(params, x)
    return jump + survival_A(scale)


# ---------------------------------------------------------------------------
# Summability sums
# ---------------------------------------------------------------------------


def a_tail_sums(
    params: ModelParams, x: float, n_max: int | None = None
) -> tuple[float, float]:
    """Exact and asymptotic values of ``sum_{n>=1} P(A > x*b^-n)``.

    exact:     ``sum_n 1/(1 + floor(x*b^-n))`` with ``n_max`` chosen so the
               geometric remainder is below 1e-16 of the sum;
    asymptote: ``b/((1-b)*x)``.

    The exact sum keeps the integer floors, which is why desk-scale ratios
    sit a couple of percent away from 1.
    """
    if x <= 0:
        raise ValueError("x must be > 0")
    b = params.b
    asymptote = b / ((1.0 - b) * x)
    total = 0.0
    n = 1
    while True:
        total += survival_A(x * b**-n)
        # remaining terms are below sum_{m>n} b^m / x = b^(n+1)/((1-b) x)
        if b ** (n + 1) / ((1.0 - b) * x) < 1e-16 * max(total, 1e-300):
            break
        n += 1
        if n_max is not None and n > n_max:
            break
        if n > 5000:
            raise RuntimeError("a_tail_sums failed to converge")
    return total, asymptote


def correction_sum(params: ModelParams, x: float) -> float:
    """``sum_n E[A; A <= x*b^-n] * n * b^(n-1) * P(B > x)``, to convergence.

    The genuinely second-order part of the tail decomposition; multiplied
    by ``x`` it decays to zero like ``(log x)^(-epsilon)`` (boundary slow
    variation), and it decreases monotonically in ``x`` past a small start.
    """
    if x <= 1:
        raise ValueError("x must be > 1")
    b = params.b
    weight_sum = 0.0
    n = 1
    while True:
        term = truncated_mean_A(float(x) * b**-n) * n * b ** (n - 1)
        weight_sum += term
        if term < 1e-16 * weight_sum:
            break
        n += 1
        if n > 5000:
            raise RuntimeError("correction_sum failed to converge")
    return weight_sum * survival_B(params, x)


def decomposition_pred(params: ModelParams, x: float, n_max: int | None = None) -> float:
    """Full tail decomposition ``P(A > x) + sum_n per_generation_pred(n, x)``.

    ``n_max`` defaults to the smallest depth whose geometric remainder bound
    ``b^n * (2 + log(1 + b^-n))`` drops below 1e-16.
    """
    if x < 0:
        raise ValueError("x must be >= 0")
    b = params.b
    if n_max is None:
        n_max = 1
        while b**n_max * (2.0 + math.log1p(b**-n_max)) >= 1e-16 and n_max < 4000:
            n_max += 1
    total = survival_A(x)
    for n in range(1, n_max + 1):
        total += per_generation_pred(params, n, x)
    return total


# ---------------------------------------------------------------------------
# Prediction table
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PredictionTable:
    """Per-threshold values of every closed-form tail predictor.

    All entries are nonnegative; ``two_scale_total = leading + second_scale``
    by construction.  ``per_gen[i, n-1]`` holds the generation-``n`` cluster
    prediction at ``xs[i]`` for ``n = 1..gen_count``.
    """

    xs: np.ndarray
    leading: np.ndarray
    second_scale: np.ndarray
    two_scale_total: np.ndarray
    per_gen: np.ndarray
    a_tail_exact: np.ndarray
    a_tail_asym: np.ndarray

    @property
    def gen_count(self) -> int:
        return self.per_gen.shape[1]


def prediction_table(
    params: ModelParams, xs, n_max: int = 6
) -> PredictionTable:
    """Evaluate every predictor on a threshold grid.

    Raises:
        ValueError: if any grid point sits at or below the second-scale
            positivity threshold (the table's entries must all be
            nonnegative to be meaningful).
    """
    xs_arr = np.asarray(xs, dtype=np.float64)
    if xs_arr.ndim != 1 or len(xs_arr) == 0:
        raise ValueError("xs must be a nonempty 1-d grid")
    if np.any(np.diff(xs_arr) <= 0):
        raise ValueError("xs must be strictly increasing")
    threshold = second_scale_positivity_threshold(params)
    if np.any(xs_arr < threshold):
        bad = float(xs_arr[xs_arr < threshold][0])
        raise ValueError(
            f"grid point x={bad:g} lies below the second-scale positivity "
            f"threshold {threshold:g}; predictions there are not meaningful"
        )
    if n_max < 1:
        raise ValueError("n_max must be >= 1")

    lead = leading_tail(params, xs_arr)
    second = second_scale(params, xs_arr)
    per_gen = np.empty((len(xs_arr), n_max))
    a_exact = np.empty(len(xs_arr))
    a_asym = np.empty(len(xs_arr))
    for i, x in enumerate(xs_arr):
        for n in range(1, n_max + 1):
            per_gen[i, n - 1] = per_generation_pred(params, n, float(x))
        a_exact[i], a_asym[i] = a_tail_sums(params, float(x))

    table = PredictionTable(
        xs=xs_arr,
        leading=lead,
        second_scale=second,
        two_scale_total=lead + second,
        per_gen=per_gen,
        a_tail_exact=a_exact,
        a_tail_asym=a_asym,
    )
    for field in (
        table.leading,
        table.second_scale,
        table.two_scale_total,
        table.per_gen,
        table.a_tail_exact,
        table.a_tail_asym,
    ):
        if np.any(field < 0):
            raise RuntimeError("prediction table produced a negative entry")
        field.setflags(write=False)
    table.xs.setflags(write=False)
    return table
