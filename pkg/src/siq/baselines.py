"""Baseline estimators: permutation sampling and the kernel-weighted WLS fit.

The two permutation estimators average discrete derivatives along random
player orderings (window sliding for the recursive-axiom index, leftmost
anchoring plus an exact lower-order phase for the Taylor index). The
faithful index is fit by weighted least squares over a stratified coalition
sample with an efficiency constraint row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InsufficientBudgetError, SchemaError, SolverError
from .estimator import (
    EstimateReport,
    WelfordAccumulator,
    determine_sampling_order,
    draw_coalitions,
)
from .exact import (
    InteractionScores,
    canonical_subsets,
    discrete_derivative,
    submasks,
)
from .games import BudgetedGame, Game, ShiftedGame, full_mask, mask_of
from .weights import FSI_TOP, SII, STI, sampling_weights

# Constraint rows mimic an infinite weight with a large finite one; doubling
# this factor must not move any score by more than 1e-6.
CONSTRAINT_WEIGHT_FACTOR = 1.0e7


def permutation_cost_sii(d: int, s0: int) -> int:
    """Evaluations consumed by one permutation of the window-sliding estimator."""
    return sum(2**s * (d - s + 1) for s in range(1, s0 + 1))


def permutation_cost_sti(d: int, s0: int) -> int:
    """Evaluations consumed by one permutation of the top-order phase."""
    return 2**s0 * math.comb(d, s0)


def pb_sii(game: Game, s0: int, budget: int, seed: int = 0) -> EstimateReport:
    """Permutation-sampling estimate of the recursive-axiom index, all orders.

    Each permutation slides a window of every length s <= s0 along the
    ordering and adds the window's derivative on top of its predecessors.
    Subsets no window ever covered report 0 and are flagged unvisited.
    """
    d = game.d
    cost = permutation_cost_sii(d, s0)
    if budget < cost:
        raise InsufficientBudgetError(
            f"one permutation needs {cost} evaluations, budget is {budget}"
        )
    budgeted = BudgetedGame(game, calls_limit=budget)
    rng = np.random.default_rng(seed)
    subsets = canonical_subsets(d, s0)
    acc = {m: [0, 0.0, 0.0] for m in subsets}  # count, mean, m2
    remaining = budget
    n_perms = 0
    while remaining >= cost:
        n_perms += 1
        perm = rng.permutation(d)
        for s in range(1, s0 + 1):
            pred = 0
            for start in range(d - s + 1):
                window = mask_of(int(p) for p in perm[start : start + s])
                val = discrete_derivative(budgeted, window, pred)
                slot = acc[window]
                slot[0] += 1
                d1 = val - slot[1]
                slot[1] += d1 / slot[0]
                slot[2] += d1 * (val - slot[1])
                pred |= 1 << int(perm[start])
        remaining -= cost
    scores = {m: acc[m][1] for m in subsets}
    variances = {
        m: acc[m][2] / (acc[m][0] - 1) if acc[m][0] >= 2 else 0.0 for m in subsets
    }
    unvisited = [m for m in subsets if acc[m][0] == 0]
    return EstimateReport(
        scores=InteractionScores(kind=SII, d=d, s0=s0, scores=scores),
        variances=variances,
        c_part={},
        k0=0,
        samples_drawn=n_perms,
        budget_used=budgeted.calls_used,
        budget_limit=budget,
        seed=seed,
        estimator="pb_sii",
        distinct_evals=budgeted.distinct_calls,
        k0_covers_order=True,
        variance_valid=all(acc[m][0] >= 2 for m in subsets),
        unvisited=unvisited,
    )


def pb_sti(game: Game, s0: int, budget: int, seed: int = 0) -> EstimateReport:
    """Permutation-sampling estimate of the Taylor index.

    Lower orders are the exact derivative at the empty set (shifted values,
    so the empty evaluation is charged once). The top order averages, per
    permutation, the derivative of each subset on the predecessors of its
    leftmost member; that combination keeps the estimate sum at nu0(D) for
    every completed run.
    """
    d = game.d
    lower_cost = 1 + sum(math.comb(d, s) for s in range(1, s0))
    perm_cost = permutation_cost_sti(d, s0)
    if budget < lower_cost + perm_cost:
        raise InsufficientBudgetError(
            f"need {lower_cost} exact-phase plus {perm_cost} per-permutation "
            f"evaluations, budget is {budget}"
        )
    budgeted = BudgetedGame(game, calls_limit=budget)
    shifted = ShiftedGame(budgeted)
    subsets = canonical_subsets(d, s0)

    eval0 = {0: 0.0}
    for m in subsets:
        if m.bit_count() < s0:
            eval0[m] = shifted.value0(m)
    scores: dict[int, float] = {}
    for m in subsets:
        s = m.bit_count()
        if s == s0:
            continue
        scores[m] = sum(
            (-1.0 if (s - sub.bit_count()) % 2 else 1.0) * eval0[sub]
            for sub in submasks(m)
        )

    top = [m for m in subsets if m.bit_count() == s0]
    top_players = [tuple(i for i in range(d) if m >> i & 1) for m in top]
    acc = WelfordAccumulator(len(top))
    rng = np.random.default_rng(seed)
    remaining = budget - budgeted.calls_used
    while remaining >= perm_cost:
        perm = rng.permutation(d)
        pos = np.empty(d, dtype=np.int64)
        pos[perm] = np.arange(d)
        prefix = [0] * (d + 1)
        for j in range(d):
            prefix[j + 1] = prefix[j] | (1 << int(perm[j]))
        vals = np.empty(len(top))
        for i, (m, players) in enumerate(zip(top, top_players)):
            first = min(int(pos[p]) for p in players)
            vals[i] = discrete_derivative(budgeted, m, prefix[first])
        acc.update(vals)
        remaining -= perm_cost
    top_var = acc.variance()
    for i, m in enumerate(top):
        scores[m] = float(acc.mean[i])
    variances = {m: 0.0 for m in subsets}
    for i, m in enumerate(top):
        variances[m] = float(top_var[i])
    return EstimateReport(
        scores=InteractionScores(kind=STI, d=d, s0=s0, scores=scores),
        variances=variances,
        c_part={m: v for m, v in scores.items() if m.bit_count() < s0},
        k0=0,
        samples_drawn=acc.n,
        budget_used=budgeted.calls_used,
        budget_limit=budget,
        seed=seed,
        estimator="pb_sti",
        distinct_evals=budgeted.distinct_calls,
        k0_covers_order=True,
        variance_valid=acc.n >= 2,
    )


@dataclass
class WlsSystem:
    """Rows of a weighted least-squares fit over interaction columns.

    ``zmat`` holds one binary row per coalition (column j is 1 when the j-th
    canonical subset is contained in the coalition); the first row is the
    all-ones efficiency constraint carrying a large weight.
    """

    zmat: np.ndarray
    weights: np.ndarray
    response: np.ndarray
    columns: list[int]


def wls_solve(system: WlsSystem) -> np.ndarray:
    """Solve the normal equations of a weighted least-squares system.

    Uses a symmetric (Cholesky) factorization; a numerically singular matrix
    (pivot below 1e-12 of the largest) gets one ridge retry of
    1e-10 * trace / n before giving up with the null direction named. A large
    constraint weight makes forming the normal matrix lossy, so the solve is
    polished with iterative refinement whose residuals come from the original
    rows (per-row misfit first, scaling after), not the formed matrix.
    """
    z, w, y = system.zmat, system.weights, system.response
    if z.shape[0] < z.shape[1]:
        raise SchemaError(
            f"system has {z.shape[0]} rows for {z.shape[1]} columns; need at least as many rows"
        )
    if np.any(w <= 0):
        raise SchemaError("weights must be positive")
    a = (z.T * w) @ z
    b = z.T @ (w * y)

    def try_solve(mat: np.ndarray, ridge: float) -> np.ndarray | None:
        try:
            chol = np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            return None
        diag = np.diagonal(chol)
        if diag.min() < 1e-6 * diag.max():  # pivot ratio 1e-12 on the normal matrix
            return None

        def factored(rhs: np.ndarray) -> np.ndarray:
            return np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))

        out = factored(b)
        for _ in range(3):
            residual = z.T @ (w * (y - z @ out)) - ridge * out
            out += factored(residual)
        return out

    beta = try_solve(a, 0.0)
    if beta is None:
        ridge = 1e-10 * np.trace(a) / a.shape[0]
        beta = try_solve(a + ridge * np.eye(a.shape[0]), ridge)
    if beta is None:
        eigvals, eigvecs = np.linalg.eigh(a)
        null = eigvecs[:, 0]
        worst = np.argsort(-np.abs(null))[:3]
        names = ", ".join(str(system.columns[i]) for i in worst)
        raise SolverError(
            f"normal matrix is singular (smallest eigenvalue {eigvals[0]:.3e}); "
            f"null direction is dominated by columns {names}"
        )
    return beta


def kb_fsi(game: Game, s0: int, budget: int, seed: int = 0) -> EstimateReport:
    """Kernel-weighted least-squares estimate of the faithful index.

    Coalitions split into the same deterministic border / sampled center as
    the sampling estimator with kernel weights. Border rows carry their exact
    probability; sampled rows are aggregated by occurrence count and rescaled
    by the residual probability mass over the draw count. Duplicate draws
    bump the weight without re-evaluating the model. All orders up to s0 are
    fit; only the top order has a ground-truth counterpart.
    """
    d = game.d
    subsets = canonical_subsets(d, s0)
    if budget < 2 + len(subsets):
        raise InsufficientBudgetError(
            f"need at least {2 + len(subsets)} evaluations to make the fit "
            f"solvable, budget is {budget}"
        )
    budgeted = BudgetedGame(game, calls_limit=budget)
    shifted = ShiftedGame(budgeted)
    qw = sampling_weights(d)
    plan = determine_sampling_order(qw, budget)
    subset_arr = np.array(subsets, dtype=np.int64)

    # Per-coalition probability of the order-1 kernel distribution over T_1.
    mass1 = np.array(
        [qw.q[t] * math.comb(d, t) for t in range(1, d)]
    )
    norm1 = mass1.sum()

    nu0_full = shifted.value0(full_mask(d))  # also charges the empty set
    rows: list[np.ndarray] = [np.ones(len(subsets))]
    weights: list[float] = [1.0]  # placeholder, set to c0 below
    response: list[float] = [nu0_full]

    def encoding(t_mask: int) -> np.ndarray:
        return ((subset_arr & t_mask) == subset_arr).astype(np.float64)

    for t in plan.deterministic_sizes:
        if t == 0 or t == d:
            continue
        p_coal = qw.q[t] / norm1
        for players in combinations(range(d), t):
            t_mask = mask_of(players)
            rows.append(encoding(t_mask))
            weights.append(p_coal)
            response.append(shifted.value0(t_mask))

    n_draws = 0 if plan.is_empty else plan.budget_remaining
    rng = np.random.default_rng(seed)
    row_of: dict[int, int] = {}
    counts: dict[int, int] = {}
    for t_mask in draw_coalitions(plan, n_draws, rng):
        if t_mask in counts:
            counts[t_mask] += 1
        else:
            counts[t_mask] = 1
            row_of[t_mask] = len(rows)
            rows.append(encoding(t_mask))
            weights.append(0.0)
            response.append(shifted.value0(t_mask))
    if n_draws:
        residual_mass = sum(
            qw.q[t] * math.comb(d, int(t)) for t in plan.sizes
        ) / norm1
        for t_mask, n in counts.items():
            weights[row_of[t_mask]] = n * residual_mass / n_draws

    w = np.array(weights)
    w[0] = CONSTRAINT_WEIGHT_FACTOR * (w[1:].max() if len(w) > 1 else 1.0)
    system = WlsSystem(
        zmat=np.array(rows),
        weights=w,
        response=np.array(response),
        columns=subsets,
    )
    beta = wls_solve(system)
    return EstimateReport(
        scores=InteractionScores(
            kind=FSI_TOP, d=d, s0=s0,
            scores={m: float(v) for m, v in zip(subsets, beta)},
        ),
        variances={m: 0.0 for m in subsets},
        c_part={},
        k0=plan.k0,
        samples_drawn=n_draws,
        budget_used=budgeted.calls_used,
        budget_limit=budget,
        seed=seed,
        estimator="kb_fsi",
        distinct_evals=budgeted.distinct_calls,
        k0_covers_order=plan.k0 >= s0,
        variance_valid=False,
    )
