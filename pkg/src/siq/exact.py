"""Exact interaction scores, computed three independent ways.

The double sum over disjoint contexts (the index definition), a single
weighted pass over the whole powerset, and the closed form for
sum-of-unanimity games. The three routes agree to float precision and back
every estimator test. All of them are oracles: game evaluations are memoized
into a table and budgets do not apply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import CapacityError, SchemaError
from .games import Game, SoumGame, check_coalition, full_mask, mask_of, players_of, value_table
from .weights import FSI_TOP, SII, SV, WeightFamily, binom_float, shapley_kernel

# The definition route costs ~4^d table operations; the single pass 2^d.
MAX_DEFINITION_PLAYERS = 14
MAX_REPRESENTATION_PLAYERS = 24


def canonical_subsets(d: int, s0: int, top_only: bool = False) -> list[int]:
    """All interaction subset masks, sorted by (size, mask)."""
    out = []
    orders = [s0] if top_only else range(1, s0 + 1)
    for s in orders:
        masks = sorted(mask_of(c) for c in combinations(range(d), s))
        out.extend(masks)
    return out


def subsets_for_kind(kind: str, d: int, s0: int) -> list[int]:
    return canonical_subsets(d, s0, top_only=kind == FSI_TOP)


@dataclass
class InteractionScores:
    """Scores for every interaction subset up to the maximum order.

    ``scores`` maps subset masks to values; the key set is all nonempty
    subsets with size <= s0, or only the size-s0 slice for the faithful
    index (whose lower orders have no closed form).
    """

    kind: str
    d: int
    s0: int
    scores: dict[int, float]

    def order_slice(self, s: int) -> dict[int, float]:
        return {m: v for m, v in self.scores.items() if m.bit_count() == s}

    def total(self) -> float:
        return float(sum(self.scores.values()))

    def sorted_items(self) -> list[tuple[int, float]]:
        return sorted(self.scores.items(), key=lambda kv: (kv[0].bit_count(), kv[0]))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "d": self.d,
            "s0": self.s0,
            "scores": [
                {"players": players_of(m), "value": v} for m, v in self.sorted_items()
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InteractionScores":
        try:
            scores = {
                mask_of(e["players"]): float(e["value"]) for e in data["scores"]
            }
            return cls(kind=data["kind"], d=data["d"], s0=data["s0"], scores=scores)
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed score object: {exc}") from exc


def submasks(mask: int) -> list[int]:
    """All submasks of a mask, including 0 and the mask itself."""
    out = []
    sub = mask
    while True:
        out.append(sub)
        if sub == 0:
            return out
        sub = (sub - 1) & mask


def discrete_derivative(game: Game, s_mask: int, t_mask: int) -> float:
    """Inclusion-exclusion of the game over T u L, L subset of S.

    Measures the pure interaction of S on top of the disjoint context T;
    consumes exactly 2^|S| evaluations.
    """
    if s_mask == 0:
        raise SchemaError("the derivative subset must be nonempty")
    if s_mask & t_mask:
        raise SchemaError("derivative subset and context coalition must be disjoint")
    check_coalition(s_mask | t_mask, game.d)
    s = s_mask.bit_count()
    total = 0.0
    for sub in submasks(s_mask):
        sign = -1.0 if (s - sub.bit_count()) % 2 else 1.0
        total += sign * game.value(t_mask | sub)
    return total


def _all_masks(d: int) -> np.ndarray:
    return np.arange(1 << d, dtype=np.int64)


def exact_cii_definition(game: Game, kind: str, s0: int) -> InteractionScores:
    """Index scores from the defining double sum over disjoint contexts."""
    d = game.d
    if d > MAX_DEFINITION_PLAYERS:
        raise CapacityError(
            f"definition route is capped at d={MAX_DEFINITION_PLAYERS}, got {d}"
        )
    vals = value_table(game)
    fam = WeightFamily(kind, d, s0)
    masks = _all_masks(d)
    scores: dict[int, float] = {}
    for s in fam.orders:
        m_s = fam.m[s]
        for players in combinations(range(d), s):
            s_mask = mask_of(players)
            contexts = masks[(masks & s_mask) == 0]
            delta = np.zeros(len(contexts))
            for sub in submasks(s_mask):
                sign = -1.0 if (s - sub.bit_count()) % 2 else 1.0
                delta += sign * vals[contexts | sub]
            t_sizes = np.bitwise_count(contexts)
            scores[s_mask] = float(m_s[t_sizes] @ delta)
    return InteractionScores(kind=kind, d=d, s0=s0, scores=scores)


def exact_cii_representation(game: Game, kind: str, s0: int) -> InteractionScores:
    """Index scores from one weighted pass over the whole powerset.

    Accumulates shifted values: the gamma weights only sum to zero over the
    complete powerset, so the unshifted game would leak the empty value into
    every partial sum. Terms are summed exactly rounded (fsum), which makes
    the result invariant under player relabeling to the last bit.
    """
    d = game.d
    if d > MAX_REPRESENTATION_PLAYERS:
        raise CapacityError(
            f"powerset pass is capped at d={MAX_REPRESENTATION_PLAYERS}, got {d}"
        )
    vals = value_table(game)
    nu0 = vals - vals[0]
    fam = WeightFamily(kind, d, s0)
    masks = _all_masks(d)
    t_all = np.bitwise_count(masks)
    scores: dict[int, float] = {}
    for s_mask in subsets_for_kind(kind, d, s0):
        s = s_mask.bit_count()
        k = np.bitwise_count(masks & s_mask)
        scores[s_mask] = math.fsum(nu0 * fam.gamma[s, t_all, k])
    return InteractionScores(kind=kind, d=d, s0=s0, scores=scores)


def exact_sv_kernel(game: Game) -> InteractionScores:
    """Order-1 scores via the kernel-weighted centered representation.

    I(i) = nu0(D)/d + sum over proper nonempty T of
    nu0(T) mu(t) [1(i in T) - t/d].
    """
    d = game.d
    if d > MAX_REPRESENTATION_PLAYERS:
        raise CapacityError(
            f"powerset pass is capped at d={MAX_REPRESENTATION_PLAYERS}, got {d}"
        )
    vals = value_table(game)
    nu0 = vals - vals[0]
    masks = _all_masks(d)
    t_all = np.bitwise_count(masks).astype(np.float64)
    mu = np.zeros(d + 1)
    for t in range(1, d):
        mu[t] = shapley_kernel(d, t)
    mu_all = mu[t_all.astype(np.int64)]
    base = nu0[-1] / d
    scores: dict[int, float] = {}
    for i in range(d):
        member = ((masks >> i) & 1).astype(np.float64)
        scores[1 << i] = base + math.fsum(nu0 * mu_all * (member - t_all / d))
    return InteractionScores(kind=SV, d=d, s0=1, scores=scores)


def soum_ground_truth(soum: SoumGame, kind: str, s0: int) -> InteractionScores:
    """Closed-form scores for a sum of unanimity games, any player count.

    By linearity only the per-term kernel omega(q, r) is needed, where q is
    the term subset size and r the overlap with the interaction subset:

        omega(q, r) = sum_t sum_k C(d-q-(s-r), t-q-k) C(s-r, k) gamma_s(t, k+r)

    with k up to min(t-q, s-r). Tables are cached per (s, q, r).
    """
    d = soum.d
    fam = WeightFamily(kind, d, s0)
    cache: dict[tuple[int, int, int], float] = {}

    def omega(s: int, q: int, r: int) -> float:
        key = (s, q, r)
        if key not in cache:
            total = 0.0
            for t in range(q, d + 1):
                for k in range(min(t - q, s - r) + 1):
                    count = binom_float(d - q - (s - r), t - q - k)
                    if count == 0.0:
                        continue
                    total += count * binom_float(s - r, k) * fam.gamma[s, t, k + r]
            cache[key] = total
        return cache[key]

    scores: dict[int, float] = {}
    for s_mask in subsets_for_kind(kind, d, s0):
        s = s_mask.bit_count()
        acc = 0.0
        for q_mask, coef in soum.terms:
            acc += coef * omega(s, q_mask.bit_count(), (q_mask & s_mask).bit_count())
        scores[s_mask] = acc
    return InteractionScores(kind=kind, d=d, s0=s0, scores=scores)


def sii_top_order_sum(game: Game, s0: int) -> float:
    """Sum of all order-s0 scores of the recursive-axiom index, closed form.

    Only coalitions of size < s0 and their complements are evaluated:
    sum_{t<s0} (-1)^t r(t) [(-1)^(s0) v(T) + v(D\\T)] with
    r(t) = C(d-t, s0-t-1)/s0.
    """
    d = game.d
    if d > MAX_REPRESENTATION_PLAYERS:
        raise CapacityError(f"capped at d={MAX_REPRESENTATION_PLAYERS}, got {d}")
    if not 1 <= s0 <= d:
        raise SchemaError(f"order must be in 1..{d}, got {s0}")
    full = full_mask(d)
    sign_s0 = -1.0 if s0 % 2 else 1.0
    total = 0.0
    for t in range(s0):
        r_t = binom_float(d - t, s0 - t - 1) / s0
        sign_t = -1.0 if t % 2 else 1.0
        for players in combinations(range(d), t):
            t_mask = mask_of(players)
            total += sign_t * r_t * (
                sign_s0 * game.value(t_mask) + game.value(full ^ t_mask)
            )
    return total


def exact_scores(game: Game, kind: str, s0: int) -> InteractionScores:
    """Preferred exact route: closed form for SOUMs, powerset pass otherwise."""
    if isinstance(game, SoumGame):
        return soum_ground_truth(game, kind, s0)
    return exact_cii_representation(game, kind, s0)


def exact_sv(game: Game) -> InteractionScores:
    """Order-1 scores via the classical weighted sum (definition route)."""
    scores = exact_cii_definition(game, SII, 1)
    return InteractionScores(kind=SV, d=game.d, s0=1, scores=scores.scores)
