"""Efficiency-preserving Bernoulli aggregation of recursive-index scores.

Scores of all orders up to s0 are folded so that their sum equals the
shifted grand-coalition value. The aggregation is order-recursive: raising
the maximum order from k-1 to k keeps the new top order as-is and corrects
every lower order S by B_{k-s} times the sum of order-k scores of its
supersets. The order-1 case is the plain attribution vector.
"""

from __future__ import annotations

import math
from itertools import combinations

from .errors import SchemaError
from .exact import InteractionScores
from .games import Game, full_mask, mask_of
from .weights import NSII, SII, SV, bernoulli_numbers


def aggregate_nsii(sii: InteractionScores, s0: int) -> InteractionScores:
    """Fold base scores of all orders <= s0 into the efficient aggregate.

    Top-order values pass through unchanged; the result sums to the shifted
    grand-coalition value whenever the base scores are exact.
    """
    if sii.kind not in (SII, SV):
        raise SchemaError(f"aggregation expects base kind {SII!r}, got {sii.kind!r}")
    if s0 < 1 or s0 > sii.d:
        raise SchemaError(f"aggregation order must be in 1..{sii.d}, got {s0}")
    d = sii.d
    for s in range(1, s0 + 1):
        have = sum(1 for m in sii.scores if m.bit_count() == s)
        if have != math.comb(d, s):
            raise SchemaError(
                f"base scores are missing order-{s} subsets ({have} of {math.comb(d, s)})"
            )
    bern = bernoulli_numbers(s0)
    current = {m: v for m, v in sii.scores.items() if m.bit_count() == 1}
    for k in range(2, s0 + 1):
        out = dict(current)
        for m, v in sii.scores.items():
            if m.bit_count() == k:
                out[m] = v
        for m in current:
            s = m.bit_count()
            others = [i for i in range(d) if not m >> i & 1]
            extra = 0.0
            for added in combinations(others, k - s):
                extra += sii.scores[m | mask_of(added)]
            out[m] = current[m] + bern[k - s] * extra
        current = out
    return InteractionScores(kind=NSII, d=d, s0=s0, scores=current)


def efficiency_gap(scores: InteractionScores, game: Game) -> float:
    """Sum of all scores minus the shifted grand-coalition value."""
    nu0_full = game.value(full_mask(game.d)) - game.value(0)
    return scores.total() - nu0_full
