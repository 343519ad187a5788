"""Stratified sampling estimator for any cardinal interaction index.

One run splits coalition sizes into a deterministic border (enumerated
exactly once) and a sampled center (drawn i.i.d. with replacement,
duplicates charged). Every evaluated coalition updates all interaction
estimates at once through the precomputed gamma table; sampled contributions
stream through a Welford accumulator so each subset gets a point estimate
and an unbiased sample variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numba
import numpy as np

from .errors import EmptySamplingRangeError, InsufficientBudgetError, SchemaError
from .exact import InteractionScores, subsets_for_kind
from .games import BudgetedGame, Game, ShiftedGame, check_coalition, full_mask, mask_of
from .weights import (
    SCHEME_SHAPLEY_KERNEL,
    SCHEME_SII_TAIL,
    SV,
    SamplingWeights,
    WeightFamily,
    harmonic,
    sampling_weights,
    shapley_kernel,
    validate_kind,
)


@dataclass
class SamplingPlan:
    """Split of coalition sizes into deterministic border and sampled center.

    ``p_size[i]`` is P(|T| = sizes[i]); a specific coalition of size t has
    probability p_size(t) / C(d, t). ``budget_remaining`` is what is left for
    sampling after the border is paid for.
    """

    d: int
    k0: int
    sizes: np.ndarray
    p_size: np.ndarray
    deterministic_sizes: list[int]
    budget_remaining: int
    cum_p: np.ndarray = field(init=False)
    inv_coalition_prob: np.ndarray = field(init=False)

    def __post_init__(self):
        self.cum_p = np.cumsum(self.p_size)
        inv = np.zeros(self.d + 1)
        for sz, p in zip(self.sizes, self.p_size):
            if p > 0:
                inv[sz] = math.comb(self.d, int(sz)) / p
        self.inv_coalition_prob = inv

    @property
    def is_empty(self) -> bool:
        return len(self.sizes) == 0

    def coalition_prob(self, t: int) -> float:
        idx = np.searchsorted(self.sizes, t)
        if idx >= len(self.sizes) or self.sizes[idx] != t:
            return 0.0
        return float(self.p_size[idx]) / math.comb(self.d, t)


def determine_sampling_order(weights: SamplingWeights, budget: int) -> SamplingPlan:
    """Promote border sizes to the deterministic part while the budget allows.

    Starting from the extremes, size t (and d-t) is promoted when the
    expected draw count per coalition of that size reaches one, i.e. when
    budget * q(t) meets the current normalization over the remaining sampled
    range. Sizes 0 and d are promoted whenever two evaluations are
    affordable, which is the operational meaning of their large tail weight.
    Promotion stops at the first failing size so the border stays contiguous;
    a budget of 2^d promotes every size and leaves nothing to sample.
    """
    if budget < 0:
        raise SchemaError("budget must be nonnegative")
    d, q = weights.d, weights.q
    k0 = 0
    remaining = budget
    for t in range(d // 2 + 1):
        if k0 > d - k0:
            break
        cost = math.comb(d, t) if t == d - t else 2 * math.comb(d, t)
        if t == 0:
            if remaining < 2:
                break
        else:
            norm = sum(q[k] * math.comb(d, k) for k in range(k0, d - k0 + 1))
            if not (remaining * q[t] >= norm and remaining * q[d - t] >= norm):
                break
        k0 += 1
        remaining -= cost
    if k0 > d - k0:
        sizes = np.empty(0, dtype=np.int64)
        p_size = np.empty(0)
    else:
        sizes = np.arange(k0, d - k0 + 1, dtype=np.int64)
        mass = np.array([q[t] * math.comb(d, int(t)) for t in sizes])
        p_size = mass / mass.sum()
    deterministic = sorted(set(range(k0)) | set(range(d - k0 + 1, d + 1)))
    return SamplingPlan(
        d=d,
        k0=k0,
        sizes=sizes,
        p_size=p_size,
        deterministic_sizes=deterministic,
        budget_remaining=remaining,
    )


def sample_coalition(plan: SamplingPlan, rng: np.random.Generator) -> int:
    """Draw one coalition: size by p_size, then a uniform subset of that size."""
    if plan.is_empty:
        raise EmptySamplingRangeError("the plan has no sampled sizes")
    idx = int(np.searchsorted(plan.cum_p, rng.random(), side="right"))
    idx = min(idx, len(plan.sizes) - 1)
    t = int(plan.sizes[idx])
    members = rng.permutation(plan.d)[:t]
    return mask_of(int(i) for i in members)


def draw_coalitions(plan: SamplingPlan, n: int, rng: np.random.Generator) -> list[int]:
    """Draw n coalitions i.i.d. from the plan, batched.

    Sizes come from one inverse-CDF pass; members are the t smallest of d
    uniform keys per draw, which is a uniform size-t subset. The stream is a
    pure function of (plan, n, generator state), and every estimator draws
    through here, so runs configured with equal seeds share their streams.
    """
    if n == 0:
        return []
    if plan.is_empty:
        raise EmptySamplingRangeError("the plan has no sampled sizes")
    size_idx = np.searchsorted(plan.cum_p, rng.random(n), side="right")
    np.clip(size_idx, 0, len(plan.sizes) - 1, out=size_idx)
    t_arr = plan.sizes[size_idx]
    keys = rng.random((n, plan.d))
    masks = np.zeros(n, dtype=np.int64)
    for t in np.unique(t_arr):
        t = int(t)
        if t == 0:
            continue
        rows = np.nonzero(t_arr == t)[0]
        cols = np.argpartition(keys[rows], t - 1, axis=1)[:, :t]
        masks[rows] = np.bitwise_or.reduce(
            np.int64(1) << cols.astype(np.int64), axis=1
        )
    return [int(m) for m in masks]


@numba.njit(cache=True)
def _welford_step(mean, m2, values, n):  # pragma: no cover - compiled
    for i in range(mean.shape[0]):
        d1 = values[i] - mean[i]
        mean[i] += d1 / n
        m2[i] += d1 * (values[i] - mean[i])


class WelfordAccumulator:
    """Single-pass running mean and squared-deviation sum over a vector.

    The four-line recurrence runs compiled: it sits in the per-sample hot
    loop of every estimator and must cost no more than the bookkeeping of a
    deterministic border evaluation.
    """

    def __init__(self, size: int):
        self.n = 0
        self.mean = np.zeros(size)
        self.m2 = np.zeros(size)

    def update(self, values: np.ndarray) -> None:
        self.n += 1
        _welford_step(self.mean, self.m2, np.asarray(values, dtype=np.float64), self.n)

    def variance(self) -> np.ndarray:
        """Unbiased sample variance; zeros while fewer than two updates."""
        if self.n < 2:
            return np.zeros_like(self.m2)
        return self.m2 / (self.n - 1)


class InteractionUpdater:
    """Gamma-weight rows for updating all interaction subsets from one coalition."""

    def __init__(self, kind: str, d: int, s0: int):
        self.kind = kind
        self.d = d
        self.s0 = s0
        self.masks = np.array(subsets_for_kind(kind, d, s0), dtype=np.int64)
        self.orders = np.bitwise_count(self.masks).astype(np.int64)
        self.family = WeightFamily(kind, d, s0)

    def __len__(self) -> int:
        return len(self.masks)

    def gamma_row(self, t_mask: int, t: int) -> np.ndarray:
        k = np.bitwise_count(self.masks & t_mask)
        return self.family.gamma[self.orders, t, k]


@dataclass
class EstimateReport:
    """Point estimates plus sampling metadata for one estimator run."""

    scores: InteractionScores
    variances: dict[int, float]
    c_part: dict[int, float]
    k0: int
    samples_drawn: int
    budget_used: int
    budget_limit: int
    seed: int | None
    estimator: str
    distinct_evals: int
    k0_covers_order: bool
    variance_valid: bool
    unvisited: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = self.scores.to_dict()
        order = [m for m, _ in self.scores.sorted_items()]
        out["variances"] = [self.variances[m] for m in order]
        out["k0"] = self.k0
        out["samples_drawn"] = self.samples_drawn
        out["budget_used"] = self.budget_used
        out["budget_limit"] = self.budget_limit
        out["seed"] = self.seed
        out["estimator"] = self.estimator
        out["distinct_evals"] = self.distinct_evals
        out["k0_covers_order"] = self.k0_covers_order
        out["variance_valid"] = self.variance_valid
        if self.unvisited:
            out["unvisited"] = [
                sorted(i for i in range(self.scores.d) if m >> i & 1)
                for m in sorted(self.unvisited)
            ]
        return out


def _deterministic_part(
    shifted: ShiftedGame, plan: SamplingPlan, updater: InteractionUpdater
) -> np.ndarray:
    """Accumulate the border contribution, one evaluation per coalition.

    Sizes ascend and subsets enumerate lexicographically, so accumulation
    order (and therefore the float result) is reproducible.
    """
    c = np.zeros(len(updater))
    d = plan.d
    for t in plan.deterministic_sizes:
        for players in combinations(range(d), t):
            t_mask = mask_of(players)
            eta = shifted.value0(t_mask)  # charges the empty set exactly once
            if eta != 0.0:
                c += eta * updater.gamma_row(t_mask, t)
    return c


def shapiq_estimate(
    game: Game,
    kind: str,
    s0: int,
    budget: int,
    scheme: str = SCHEME_SHAPLEY_KERNEL,
    seed: int = 0,
) -> EstimateReport:
    """Estimate all interaction scores of one index within a call budget.

    The empty and grand coalitions must be affordable, so budget >= 2. When
    the budget covers every size the run degenerates to the exact powerset
    pass and variances are zero. The report records the realized sampling
    order; only runs with k0 >= s0 keep the constant-sum property.
    """
    validate_kind(kind, s0)
    if budget < 2:
        raise InsufficientBudgetError(f"budget must be >= 2, got {budget}")
    d = game.d
    budgeted = BudgetedGame(game, calls_limit=budget)
    shifted = ShiftedGame(budgeted)
    qw = sampling_weights(d, scheme, s0=s0 if scheme == SCHEME_SII_TAIL else 1)
    plan = determine_sampling_order(qw, budget)
    updater = InteractionUpdater(kind, d, s0)
    c = _deterministic_part(shifted, plan, updater)

    rng = np.random.default_rng(seed)
    acc = WelfordAccumulator(len(updater))
    n_samples = 0 if plan.is_empty else plan.budget_remaining
    inv_prob = plan.inv_coalition_prob
    for t_mask in draw_coalitions(plan, n_samples, rng):
        t = t_mask.bit_count()
        scale = shifted.value0(t_mask) * inv_prob[t]
        row = updater.gamma_row(t_mask, t)
        np.multiply(row, scale, out=row)
        acc.update(row)

    totals = c + acc.mean if acc.n else c.copy()
    variances = acc.variance()
    masks = [int(m) for m in updater.masks]
    return EstimateReport(
        scores=InteractionScores(
            kind=kind, d=d, s0=s0,
            scores={m: float(v) for m, v in zip(masks, totals)},
        ),
        variances={m: float(v) for m, v in zip(masks, variances)},
        c_part={m: float(v) for m, v in zip(masks, c)},
        k0=plan.k0,
        samples_drawn=acc.n,
        budget_used=budgeted.calls_used,
        budget_limit=budget,
        seed=seed,
        estimator="shapiq",
        distinct_evals=budgeted.distinct_calls,
        k0_covers_order=plan.k0 >= s0,
        variance_valid=acc.n >= 2,
    )


def sv_sampling_plan(d: int, budget: int) -> SamplingPlan:
    """Order-1 plan over all proper nonempty sizes, kernel-proportional.

    The matrix-form estimator is defined against this distribution, so the
    order-1 specialization never widens the deterministic border beyond the
    empty and grand coalitions.
    """
    if budget < 2:
        raise InsufficientBudgetError(f"budget must be >= 2, got {budget}")
    sizes = np.arange(1, d, dtype=np.int64)
    mass = np.array([shapley_kernel(d, int(t)) * math.comb(d, int(t)) for t in sizes])
    return SamplingPlan(
        d=d,
        k0=1,
        sizes=sizes,
        p_size=mass / mass.sum(),
        deterministic_sizes=[0, d],
        budget_remaining=budget - 2,
    )


def shapiq_sv_from_coalitions(game: Game, coalitions: list[int]) -> EstimateReport:
    """Order-1 estimate as a plain weighted sum over a given sample stream.

    est(i) = nu0(D)/d + (2 h_{d-1} / K) sum_k nu0(T_k) [1(i in T_k) - t_k/d].
    """
    d = game.d
    budgeted = BudgetedGame(game)
    shifted = ShiftedGame(budgeted)
    scale = 2.0 * harmonic(d - 1)
    base = shifted.value0(full_mask(d)) / d
    acc = WelfordAccumulator(d)
    idx = np.arange(d, dtype=np.int64)
    for t_mask in coalitions:
        check_coalition(t_mask, d)
        t = t_mask.bit_count()
        if t == 0 or t == d:
            raise SchemaError("sampled coalitions must be proper and nonempty")
        eta = shifted.value0(t_mask)
        member = ((t_mask >> idx) & 1).astype(np.float64)
        acc.update(scale * eta * (member - t / d))
    totals = base + acc.mean if acc.n else np.full(d, base)
    variances = acc.variance()
    masks = [1 << i for i in range(d)]
    return EstimateReport(
        scores=InteractionScores(
            kind=SV, d=d, s0=1,
            scores={m: float(v) for m, v in zip(masks, totals)},
        ),
        variances={m: float(v) for m, v in zip(masks, variances)},
        c_part={m: base for m in masks},
        k0=1,
        samples_drawn=acc.n,
        budget_used=budgeted.calls_used,
        budget_limit=budgeted.calls_used,
        seed=None,
        estimator="shapiq",
        distinct_evals=budgeted.distinct_calls,
        k0_covers_order=True,
        variance_valid=acc.n >= 2,
    )


def shapiq_sv(game: Game, budget: int, seed: int = 0) -> EstimateReport:
    """Order-1 estimator in simplified weighted-sum form.

    Agrees with the general estimator restricted to order 1 on an identical
    coalition stream, and with the matrix-form estimator on shared samples.
    """
    plan = sv_sampling_plan(game.d, budget)
    rng = np.random.default_rng(seed)
    coalitions = draw_coalitions(plan, plan.budget_remaining, rng)
    report = shapiq_sv_from_coalitions(game, coalitions)
    report.seed = seed
    report.budget_limit = budget
    return report


def uksh_constants(d: int) -> dict[str, float]:
    """Closed-form second-moment constants of the kernel sampling distribution.

    mu1 = P(i in T) = 1/2 and mu1 - mu2 = 1/(2 h_{d-1}); the inverse moment
    matrix (mu2 J + (mu1-mu2) I)^(-1) has the same two-constant structure.
    """
    h2 = 2.0 * harmonic(d - 1)
    mu1 = 0.5
    mu2 = mu1 - 1.0 / h2
    denom = (mu1 - mu2) * (mu1 + (d - 1) * mu2)
    tilde_mu2 = -mu2 / denom
    tilde_mu1 = (mu1 + (d - 2) * mu2) / denom
    return {
        "mu1": mu1,
        "mu2": mu2,
        "tilde_mu1": tilde_mu1,
        "tilde_mu2": tilde_mu2,
        "normalization": h2,
    }


def uksh_estimate(coalitions: list[int], game: Game) -> dict[int, float]:
    """Constrained matrix-form order-1 estimate from a kernel-distributed sample.

    Builds the sample moment vector, applies the closed-form inverse of the
    moment matrix (never a numeric inversion), and projects onto the
    efficiency constraint. Returns player -> estimate.
    """
    d = game.d
    consts = uksh_constants(d)
    shifted = ShiftedGame(game)
    idx = np.arange(d, dtype=np.int64)
    bhat = np.zeros(d)
    for t_mask in coalitions:
        check_coalition(t_mask, d)
        t = t_mask.bit_count()
        if t == 0 or t == d:
            raise SchemaError("sampled coalitions must be proper and nonempty")
        member = ((t_mask >> idx) & 1).astype(np.float64)
        bhat += member * shifted.value0(t_mask)
    if coalitions:
        bhat /= len(coalitions)
    nu0_full = shifted.value0(full_mask(d))

    t1, t2 = consts["tilde_mu1"], consts["tilde_mu2"]
    row_sum = t1 + (d - 1) * t2  # one row of the inverse times the ones vector
    ainv_b = t2 * bhat.sum() + (t1 - t2) * bhat
    correction = (ainv_b.sum() - nu0_full) / (d * row_sum)
    est = ainv_b - correction * row_sum
    return {i: float(est[i]) for i in range(d)}
