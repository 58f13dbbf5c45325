"""Exact truncated-PMF arithmetic with sound survival brackets.

Every distribution here is a vector of point masses on {0..N} plus a single
scalar "overflow" bucket holding all probability the computation could not
place on the grid.  The known vector is maintained pointwise *below* the true
pmf at every step (mass is only ever dropped into overflow, never invented),
which makes the survival bracket

    sum_{k > x} mass[k]  <=  P(> x)  <=  sum_{k > x} mass[k] + overflow

sound by construction.  On top of that arithmetic the module builds the
generation-aggregate laws, the stationary law of the branching fixed point,
and direct numerical checks of the convolution-tail, random-sum, and
tail-additivity relations that drive the asymptotics.

Design notes
------------
* Convolution is exact discrete convolution: direct summation for short
  vectors and zero-padded FFT (no wrap-around) for long ones, with any tiny
  negative FFT residue (below 1e-12) clipped.
* ``compound`` evaluates sum_k count[k] * summand^{*k} with a
  baby-step/giant-step polynomial scheme: ~2*sqrt(K) convolutions plus one
  matrix product instead of K convolutions.
* The stationary law is assembled as immigration plus one independent
  aggregate term per generation (the fixed point unrolled along its
  generation expansion).  Each term compounds the *conditional* nonzero
  aggregate against a Bernoulli-thinned immigration count, evaluated through
  the immigration pgf in closed form.  This keeps the per-generation overflow
  near the genuinely-above-N mass instead of re-dumping the whole immigration
  tail every generation, which is what makes desk-scale brackets at
  x ~ N/16 usable at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve, lfilter

from .model import (
    LawA,
    ModelParams,
    depth_remainder_bound,
    extinction_table,
    law_B,
    pgf_B,
)

__all__ = [
    "Pmf",
    "GeometricLaw",
    "DiracLaw",
    "TailRatioBracket",
    "RandomSumCheck",
    "TailAdditivityCheck",
    "pmf_of",
    "convolve",
    "compound",
    "conditional_nonzero",
    "thinned_immigrant_count",
    "dn_pmf",
    "generation_term",
    "stationary_pmf",
    "conv_tail_ratio",
    "random_sum_check",
    "tail_additivity_check",
]

# Masses are probabilities; anything this far below zero is a real bug, not
# FFT rounding residue.
_NEGATIVE_TOLERANCE = 1e-12
# Mass conservation required of every constructed Pmf.
_CONSERVATION_TOLERANCE = 1e-9
# Vectors at or below this length convolve directly (exact products, no FFT
# noise floor — needed when tail masses sit near 1e-19).
_DIRECT_CONV_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class Pmf:
    """Point masses on {0..N} plus an overflow bucket of unplaced probability.

    ``survival_bracket(x)`` returns sound lower/upper bounds on P(> x); the
    upper endpoint doubles as the point estimate everywhere downstream (it
    is exact whenever the unplaced mass genuinely lies above ``x``).
    """

    mass: np.ndarray
    overflow: float
    meta: str = ""

    def __post_init__(self) -> None:
        arr = np.asarray(self.mass, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("mass must be a nonempty 1-d array")
        low = float(arr.min())
        if low < -_NEGATIVE_TOLERANCE:
            raise ValueError(f"negative probability mass: {low}")
        if low < 0.0:
            arr = np.maximum(arr, 0.0)
        if self.overflow < -_NEGATIVE_TOLERANCE:
            raise ValueError(f"negative overflow: {self.overflow}")
        object.__setattr__(self, "mass", arr)
        object.__setattr__(self, "overflow", max(float(self.overflow), 0.0))
        deficit = abs(1.0 - float(np.sum(arr)) - self.overflow)
        if deficit > _CONSERVATION_TOLERANCE:
            raise ValueError(
                f"mass + overflow deviates from 1 by {deficit:.3e} "
                f"(tolerance {_CONSERVATION_TOLERANCE}) in {self.meta!r}"
            )
        arr.setflags(write=False)

    @property
    def cutoff(self) -> int:
        """Largest representable value N (mass has N+1 entries)."""
        return self.mass.size - 1

    @property
    def known_total(self) -> float:
        return float(np.sum(self.mass))

    def known_mean(self) -> float:
        """Mean of the placed mass only — a lower bound on the true mean."""
        return float(np.dot(np.arange(self.mass.size), self.mass))

    def survival_known(self, x: float) -> float:
        """Lower bound on P(> x): placed mass strictly above x."""
        lo = math.floor(x)
        if lo >= self.cutoff:
            return 0.0
        return float(np.sum(self.mass[max(lo + 1, 0) :]))

    def survival_bracket(self, x: float) -> tuple[float, float]:
        """Sound bounds: [placed mass above x, that plus all unplaced mass]."""
        lo = self.survival_known(x)
        return lo, lo + self.overflow

    def survival_curve(self) -> np.ndarray:
        """Upper survival P(> j) for j = 0..N: placed suffix sums + overflow."""
        suffix = np.concatenate([np.cumsum(self.mass[::-1])[::-1], [0.0]])
        return suffix[1:] + self.overflow


class GeometricLaw:
    """Geometric law on {0, 1, ...}: light-tailed control for tail tests."""

    def __init__(self, p: float) -> None:
        if not 0.0 < p < 1.0:
            raise ValueError(f"p out of range (0, 1): {p}")
        self.p = p

    def survival(self, k):
        k_arr = np.floor(np.asarray(k, dtype=np.float64))
        out = (1.0 - self.p) ** (k_arr + 1.0)
        return float(out) if out.ndim == 0 else out

    def pmf(self, k):
        k_arr = np.asarray(k, dtype=np.float64)
        out = self.p * (1.0 - self.p) ** k_arr
        return float(out) if out.ndim == 0 else out


class DiracLaw:
    """Unit mass at a fixed nonnegative integer."""

    def __init__(self, value: int) -> None:
        if value < 0:
            raise ValueError(f"value must be >= 0: {value}")
        self.value = int(value)

    def survival(self, k):
        k_arr = np.floor(np.asarray(k, dtype=np.float64))
        out = np.where(k_arr < self.value, 1.0, 0.0)
        return float(out) if out.ndim == 0 else out

    def pmf(self, k):
        k_arr = np.asarray(k, dtype=np.float64)
        out = np.where(k_arr == self.value, 1.0, 0.0)
        return float(out) if out.ndim == 0 else out


def pmf_of(law, cutoff: int, meta: str = "") -> Pmf:
    """Truncate a law with exact ``pmf``/``survival`` methods onto {0..cutoff}.

    The overflow bucket receives the analytic survival at the cutoff, so the
    bracket is exact for the source law.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    ks = np.arange(cutoff + 1)
    mass = np.asarray(law.pmf(ks), dtype=np.float64)
    overflow = float(law.survival(cutoff))
    name = meta or f"{getattr(law, '__name__', type(law).__name__)}@{cutoff}"
    return Pmf(mass=mass, overflow=overflow, meta=name)


def _conv_full(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact full linear convolution; FFT with zero padding for long inputs."""
    if min(a.size, b.size) <= 64 or max(a.size, b.size) <= _DIRECT_CONV_LIMIT:
        return np.convolve(a, b)
    out = fftconvolve(a, b)
    return np.maximum(out, 0.0)


def _conv_truncate(
    a: np.ndarray, b: np.ndarray, n: int
) -> tuple[np.ndarray, float]:
    """Convolve and split at the grid edge: (known part on {0..n}, spill)."""
    full = _conv_full(a, b)
    known = full[: n + 1]
    spill = float(np.sum(full[n + 1 :]))
    return known, spill


def convolve(p: Pmf, q: Pmf) -> Pmf:
    """Distribution of the sum of independent draws from ``p`` and ``q``.

    Product mass landing above the grid, and every term touching either
    overflow bucket, moves to the result's overflow.
    """
    if p.cutoff != q.cutoff:
        raise ValueError(
            f"cutoff mismatch: {p.cutoff} vs {q.cutoff} — operands must share a grid"
        )
    n = p.cutoff
    known, spill = _conv_truncate(p.mass, q.mass, n)
    overflow = (
        spill
        + p.overflow * (q.known_total + q.overflow)
        + q.overflow * p.known_total
    )
    return Pmf(
        mass=known,
        overflow=overflow,
        meta=f"conv({p.meta or '?'}, {q.meta or '?'})",
    )


def _block_width(count_support: int) -> int:
    """Baby-step width: power of two near sqrt(support), capped at 256."""
    if count_support < 4:
        return count_support + 1
    root = math.isqrt(count_support)
    return min(256, 1 << (root - 1).bit_length())


def compound(count: Pmf, summand: Pmf) -> Pmf:
    """Law of ``sum_{i=1}^{C} Y_i``: count-weighted summand convolution powers.

    Evaluates sum_k count[k] * summand^{*k} with baby-step/giant-step
    polynomial evaluation: powers 0..J-1 are built once, blocks of J
    coefficients collapse through one matrix product, and a Horner pass over
    summand^{*J} stitches the blocks.  Count overflow (C beyond the grid)
    lands in the result's overflow.
    """
    if count.cutoff != summand.cutoff:
        raise ValueError(
            f"cutoff mismatch: {count.cutoff} vs {summand.cutoff} — "
            "operands must share a grid"
        )
    n = count.cutoff
    nonzero = np.nonzero(count.mass)[0]
    if nonzero.size == 0:
        return Pmf(
            mass=np.zeros(n + 1),
            overflow=count.overflow,
            meta=f"compound({count.meta or '?'}, {summand.meta or '?'})",
        )
    support = int(nonzero[-1])
    width = _block_width(support)
    n_blocks = support // width + 1

    # Baby steps: summand powers 0..width-1 (and their bookkeeping scalars).
    rows = min(width, support + 1)
    powers = np.zeros((rows, n + 1))
    powers[0, 0] = 1.0
    pow_overflow = np.zeros(rows)
    pow_total = np.zeros(rows)
    pow_total[0] = 1.0
    s_total = summand.known_total
    for j in range(1, rows):
        known, spill = _conv_truncate(powers[j - 1], summand.mass, n)
        powers[j] = known
        pow_overflow[j] = (
            spill
            + pow_overflow[j - 1] * (s_total + summand.overflow)
            + summand.overflow * pow_total[j - 1]
        )
        pow_total[j] = float(np.sum(known))

    # Collapse count coefficients through the power table, block by block.
    padded = np.zeros(n_blocks * width)
    padded[: support + 1] = count.mass[: support + 1]
    coeff = padded.reshape(n_blocks, width)  # coeff[g, j] = count[g*width + j]
    block_mass = coeff[:, :rows] @ powers  # (n_blocks, n+1)
    block_overflow = coeff[:, :rows] @ pow_overflow
    block_total = coeff[:, :rows] @ pow_total

    if n_blocks == 1:
        acc, acc_over = block_mass[0], float(block_overflow[0])
    else:
        # Giant step: summand^{*width}, then Horner from the top block down.
        giant, g_spill = _conv_truncate(powers[rows - 1], summand.mass, n)
        g_over = (
            g_spill
            + pow_overflow[rows - 1] * (s_total + summand.overflow)
            + summand.overflow * pow_total[rows - 1]
        )
        g_total = float(np.sum(giant))
        acc = block_mass[n_blocks - 1]
        acc_over = float(block_overflow[n_blocks - 1])
        acc_total = float(block_total[n_blocks - 1])
        for g in range(n_blocks - 2, -1, -1):
            known, spill = _conv_truncate(acc, giant, n)
            acc_over = spill + acc_over * (g_total + g_over) + g_over * acc_total
            acc = known + block_mass[g]
            acc_over += float(block_overflow[g])
            acc_total = float(np.sum(known)) + float(block_total[g])

    return Pmf(
        mass=acc,
        overflow=acc_over + count.overflow,
        meta=f"compound({count.meta or '?'}, {summand.meta or '?'})",
    )


def conditional_nonzero(p: Pmf) -> Pmf:
    """The law of a draw from ``p`` conditioned on being nonzero.

    The scaled masses stay pointwise lower bounds on the true conditional
    law (the zero mass under-counts extinction, so the divisor over-counts
    survival).  The overflow is therefore taken as exactly one minus the
    placed mass rather than ``p.overflow / alive``: dividing the stored
    overflow would amplify accumulated float drift by ``1/alive``, which
    rounds outside the conservation window for deeply subcritical laws.
    """
    alive = 1.0 - float(p.mass[0])
    if alive <= 0.0:
        raise ValueError("law has no mass above zero")
    mass = p.mass.copy()
    mass[0] = 0.0
    mass /= alive
    total = float(np.sum(mass))
    if total > 1.0:
        # Extreme subcriticality can round the placed total past one;
        # scaling down keeps every entry a valid lower bound.
        mass /= total
        total = 1.0
    return Pmf(
        mass=mass,
        overflow=max(0.0, 1.0 - total),
        meta=f"nonzero({p.meta or '?'})",
    )


def thinned_immigrant_count(p: float, k_max: int, cutoff: int) -> Pmf:
    """Law of Binomial(A, p) where A is the immigration count.

    Underneath: the immigration pgf G(s) = 1 + (1-s)ln(1-s)/s composed at
    s = 1 - p(1-z) is a rational-log series whose coefficients satisfy the
    two-term recurrence (1-p) w[k] + p w[k-1] = numerator[k], stable for
    p < 1/2.  Coefficients are produced for k <= k_max; the (analytically
    exact) remainder P(count > k_max) goes to overflow.  Because every
    aggregate attached to such a count is >= 1, callers that keep
    k_max above their largest report threshold lose nothing below it.
    """
    if not 0.0 < p < 0.5:
        raise ValueError(
            f"thinning probability out of supported range (0, 0.5): {p}"
        )
    if not 1 <= k_max <= cutoff:
        raise ValueError("need 1 <= k_max <= cutoff")
    k = np.arange(k_max + 1, dtype=np.float64)
    numerator = np.empty(k_max + 1)
    log_p = math.log(p)
    numerator[0] = p * log_p
    numerator[1] = p * (-1.0 - log_p)
    if k_max >= 2:
        numerator[2:] = p / (k[2:] * (k[2:] - 1.0))
    # (1-p) w[k] + p w[k-1] = numerator[k]  <=>  an order-1 IIR filter.
    w = lfilter([1.0 / (1.0 - p)], [1.0, p / (1.0 - p)], numerator)
    mass = np.zeros(cutoff + 1)
    mass[: k_max + 1] = w
    mass[0] = 1.0 + w[0]
    overflow = 1.0 - float(np.sum(mass[: k_max + 1]))
    return Pmf(
        mass=mass,
        overflow=max(overflow, 0.0),
        meta=f"thinned-count(p={p:.3g})@{k_max}",
    )


# Cache of generation-aggregate chains keyed by (params, cutoff): building
# generation n requires every earlier generation, and the stationary
# assembly, the prediction checks, and the acceptance suite all share them.
_chain_cache: dict[tuple[ModelParams, int], list[Pmf]] = {}


def _extinct_brood_mass(
    params: ModelParams, offspring: Pmf, prev_zero: float
) -> float:
    """Exact mass at zero contributed by offspring counts above the cutoff.

    A count of ``k`` children yields an aggregate of zero with probability
    ``prev_zero ** k``, so the truncated counts' zero contribution is
    ``sum_{k > cutoff} b_k * prev_zero**k`` — the offspring pgf at
    ``prev_zero`` minus the in-support partial sum.  Using the known
    (lower-bound) zero mass for ``prev_zero`` keeps the result a lower bound
    on the true contribution, so moving it from overflow to the zero bin
    preserves the pointwise-lower-bound invariant.  Without this split the
    per-generation overflow has a constant floor and deep generations never
    damp out.
    """
    if prev_zero <= 0.0:
        return 0.0
    powers = np.power(prev_zero, np.arange(offspring.mass.size, dtype=np.float64))
    in_support = float(offspring.mass @ powers)
    dead = pgf_B(params, prev_zero) - in_support
    return min(max(dead, 0.0), offspring.overflow)


def dn_pmf(params: ModelParams, n: int, cutoff: int) -> Pmf:
    """Exact (bracketed) law of the generation-``n`` aggregate on {0..cutoff}.

    Generation 1 is the offspring law itself; each later generation is the
    compound of the offspring count with the previous generation's law, with
    the fully-extinct portion of the truncated offspring counts resolved
    analytically back to the zero bin.  The mass at zero is cross-checked
    against the pgf extinction recursion on every construction.
    """
    if n < 1:
        raise ValueError("generation index must be >= 1")
    key = (params, cutoff)
    chain = _chain_cache.setdefault(key, [])
    if not chain:
        chain.append(pmf_of(law_B(params), cutoff, meta="gen1@%d" % cutoff))
    offspring = chain[0]
    while len(chain) < n:
        prev_zero = float(chain[-1].mass[0])
        nxt = compound(offspring, chain[-1])
        dead = _extinct_brood_mass(params, offspring, prev_zero)
        mass = nxt.mass.copy()
        mass[0] += dead
        nxt = Pmf(
            mass=mass,
            overflow=nxt.overflow - dead,
            meta=f"gen{len(chain) + 1}@{cutoff}",
        )
        chain.append(nxt)
    table = extinction_table(params, n)
    for idx in range(n):
        gap = abs(float(chain[idx].mass[0]) - table.q[idx + 1])
        if gap > 1e-9 + chain[idx].overflow:
            raise RuntimeError(
                f"generation {idx + 1} extinction mass off by {gap:.3e} "
                "from the pgf recursion"
            )
    return chain[n - 1]


def generation_term(params: ModelParams, n: int, cutoff: int) -> Pmf:
    """Law of one generation's total contribution to the stationary value.

    The contribution is a sum of generation-``n`` aggregates over an
    immigration-count number of independent trees.  Zero aggregates are
    removed by Bernoulli thinning of the count (through the immigration pgf,
    so no immigration truncation error enters), and the survivors compound
    against the conditional nonzero aggregate law.
    """
    aggregate = dn_pmf(params, n, cutoff)
    alive = 1.0 - float(aggregate.mass[0])
    if alive <= 0.0:
        # Survival has rounded to zero (beyond generation ~55 at b = 0.5);
        # there is no float-resolvable contribution left to represent.
        raise RuntimeError(
            f"generation {n} aggregate extinguished below float resolution"
        )
    # Keep the count support above any usable report threshold (conditional
    # summands are >= 1 each, so dropped counts produce sums above k_max)
    # while shrinking with the survival probability to keep the recurrence
    # cheap for deep generations.
    k_max = min(cutoff, max(4097, int(2e8 * alive)))
    count = thinned_immigrant_count(alive, k_max, cutoff)
    term = compound(count, conditional_nonzero(aggregate))
    return Pmf(
        mass=term.mass, overflow=term.overflow, meta=f"gen-term{n}@{cutoff}"
    )


def stationary_pmf(
    params: ModelParams,
    cutoff: int,
    tol: float = 1e-11,
    max_iter: int = 60,
) -> Pmf:
    """Bracketed stationary law of the branching fixed point on {0..cutoff}.

    Starting from the point mass at zero, each iteration appends one more
    generation's contribution, so the iterates increase stochastically and
    their survival functions converge upward to the stationary one.  The
    first iterate is exactly the immigration law.  Iteration stops when the
    sup-norm between successive survival curves drops below ``tol``; the
    analytic bound on everything beyond the last included generation is
    folded into the overflow, keeping the final bracket sound for the true
    stationary law.

    Raises:
        RuntimeError: if ``max_iter`` iterations leave the gap above ``tol``.
    """
    if tol <= 0.0:
        raise ValueError("tol must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    current = pmf_of(LawA, cutoff, meta=f"LawA@{cutoff}")
    curve = current.survival_curve()
    gap = math.inf
    depth = 0
    for n in range(1, max_iter + 1):
        term = generation_term(params, n, cutoff)
        nxt = convolve(current, term)
        nxt_curve = nxt.survival_curve()
        # Tolerance covers accumulated FFT rounding drift, far below any
        # genuine monotonicity violation.
        if float(np.min(nxt_curve - curve)) < -1e-10:
            raise RuntimeError(
                f"survival decreased at iteration {n}: monotone convergence broken"
            )
        gap = float(np.max(nxt_curve - curve))
        current, curve, depth = nxt, nxt_curve, n
        if gap < tol:
            break
    else:
        raise RuntimeError(
            f"stationary iteration did not converge: sup-norm gap {gap:.3e} "
            f"after {max_iter} iterations (tol {tol:g})"
        )
    remainder = depth_remainder_bound(params, depth)
    return Pmf(
        mass=current.mass,
        overflow=current.overflow + remainder,
        meta=f"stationary@{cutoff}(depth={depth}, gap={gap:.2e})",
    )


@dataclass(frozen=True)
class TailRatioBracket:
    """Bracketed ratio of a convolution tail to the single tail."""

    lo: float
    hi: float
    point: float


def conv_tail_ratio(p: Pmf, x: float) -> TailRatioBracket:
    """Bracket of P(sum of two independent draws > x) / P(one draw > x).

    The point estimate is the ratio of the two upper endpoints.  A heavy
    (subexponential) tail puts this near 2; light tails push it far above.
    """
    single_lo, single_hi = p.survival_bracket(x)
    if single_lo <= 0.0:
        raise ValueError(
            f"tail below truncation resolution at x={x}: "
            "no placed mass above the threshold"
        )
    pair_lo, pair_hi = convolve(p, p).survival_bracket(x)
    return TailRatioBracket(
        lo=pair_lo / single_hi,
        hi=pair_hi / single_lo,
        point=pair_hi / single_hi,
    )


@dataclass(frozen=True)
class RandomSumCheck:
    """Exact random-sum tail versus its truncated-mean prediction."""

    exact_lo: float
    exact_hi: float
    prediction: float
    ratio: float


def random_sum_check(count_law, summand: Pmf, x: float) -> RandomSumCheck:
    """Compare the exact tail of a random sum against the two-term prediction.

    Exact side: tail of ``compound(count, summand)`` at ``x``.  Prediction:
    E[C 1{C <= x/m}] * P(Y > x) + P(C > x/m) with ``m`` the summand mean
    (known mean plus overflow placed at the grid edge — a lower bound).  The
    reported ratio uses the exact upper endpoint.
    """
    cutoff = summand.cutoff
    count = pmf_of(count_law, cutoff)
    exact_lo, exact_hi = compound(count, summand).survival_bracket(x)

    mean = summand.known_mean() + summand.overflow * (cutoff + 1)
    if mean <= 0.0:
        raise ValueError("summand mean is zero: prediction undefined")
    threshold = x / mean
    edge = min(math.floor(threshold), cutoff)
    ks = np.arange(edge + 1)
    truncated_mean = float(np.dot(ks, count.mass[: edge + 1]))
    count_tail = float(count_law.survival(threshold))
    summand_tail_hi = summand.survival_bracket(x)[1]
    prediction = truncated_mean * summand_tail_hi + count_tail
    if prediction <= 0.0:
        return RandomSumCheck(exact_lo, exact_hi, 0.0, math.nan)
    return RandomSumCheck(
        exact_lo=exact_lo,
        exact_hi=exact_hi,
        prediction=prediction,
        ratio=exact_hi / prediction,
    )


@dataclass(frozen=True)
class TailAdditivityCheck:
    """Tail of an independent sum versus the sum of individual tails."""

    sum_lo: float
    sum_hi: float
    additive_lo: float
    additive_hi: float
    ratio: float


def tail_additivity_check(
    terms: Sequence[Pmf], x: float
) -> TailAdditivityCheck:
    """Compare P(T_0 + ... + T_k > x) against sum_i P(T_i > x).

    One-big-jump behaviour makes the ratio approach 1 from above for heavy
    tails; the ratio reported is upper-endpoint over upper-endpoint.
    """
    if len(terms) == 0:
        raise ValueError("need at least one term")
    total = terms[0]
    for term in terms[1:]:
        total = convolve(total, term)
    sum_lo, sum_hi = total.survival_bracket(x)
    brackets = [term.survival_bracket(x) for term in terms]
    additive_lo = sum(b[0] for b in brackets)
    additive_hi = sum(b[1] for b in brackets)
    if additive_lo <= 0.0:
        raise ValueError(
            f"tail below truncation resolution at x={x}: "
            "no placed mass above the threshold in any term"
        )
    return TailAdditivityCheck(
        sum_lo=sum_lo,
        sum_hi=sum_hi,
        additive_lo=additive_lo,
        additive_hi=additive_hi,
        ratio=sum_hi / additive_hi,
    )
