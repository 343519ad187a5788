"""Set games: value functions over coalitions encoded as integer bitmasks.

A coalition over ``d`` players is an int mask with bit ``i`` set iff player
``i`` is a member (player 0 at bit 0). Games expose ``d`` and
``value(mask) -> float``. The module provides the synthetic sum-of-unanimity
game, a dense tabular game, a call-counting budget wrapper and an
empty-shifted view, plus JSON (de)serialization for game files.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import (
    BudgetExceededError,
    CapacityError,
    InvalidCoalitionError,
    SchemaError,
)

# Masks are plain ints; 63 players keep them inside int64 for numpy interop.
MAX_PLAYERS = 63
# Any operation touching the full powerset (2^d values) stops here.
MAX_TABULAR_PLAYERS = 24


def full_mask(d: int) -> int:
    """Mask of the grand coalition ``D``."""
    return (1 << d) - 1


def mask_of(players: Iterable[int]) -> int:
    """Build a coalition mask from player ids."""
    mask = 0
    for p in players:
        mask |= 1 << p
    return mask


def players_of(mask: int) -> list[int]:
    """Sorted player ids of a coalition mask."""
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


def check_coalition(mask: int, d: int) -> None:
    if mask < 0 or mask >> d:
        raise InvalidCoalitionError(
            f"coalition mask {mask:#x} sets bits outside players 0..{d - 1}"
        )


def check_player_count(d: int) -> None:
    if not 1 <= d <= MAX_PLAYERS:
        raise CapacityError(f"player count must be in 1..{MAX_PLAYERS}, got {d}")


class Game(Protocol):
    """Anything with a player count and a real-valued coalition function."""

    d: int

    def value(self, mask: int) -> float: ...


class SoumGame:
    """Sum of unanimity games: value(T) = sum_n a_n * 1(Q_n subset of T)."""

    def __init__(self, d: int, terms: Sequence[tuple[int, float]]):
        check_player_count(d)
        if not terms:
            raise SchemaError("a sum-of-unanimity game needs at least one term")
        for q, _ in terms:
            check_coalition(q, d)
            if q == 0:
                raise SchemaError("unanimity subsets must be nonempty")
        self.d = d
        self.terms = [(int(q), float(a)) for q, a in terms]

    def value(self, mask: int) -> float:
        check_coalition(mask, self.d)
        return sum(a for q, a in self.terms if q & mask == q)


class TabularGame:
    """Dense game: one stored value per coalition mask, 2^d entries."""

    def __init__(self, d: int, values: Sequence[float]):
        check_player_count(d)
        if d > MAX_TABULAR_PLAYERS:
            raise CapacityError(
                f"tabular games are capped at d={MAX_TABULAR_PLAYERS}, got {d}"
            )
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (1 << d,):
            raise SchemaError(
                f"tabular game for d={d} needs exactly {1 << d} values, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise SchemaError("tabular game values must all be finite")
        self.d = d
        self.values = arr
        self.values.flags.writeable = False

    def value(self, mask: int) -> float:
        check_coalition(mask, self.d)
        return float(self.values[mask])


class BudgetedGame:
    """Counts every evaluation request, repeats included.

    The cost model is model evaluations: memoization (off by default) may
    short-circuit the inner call but the request is still charged. Exceeding
    ``calls_limit`` raises rather than silently overrunning. The counter is
    not atomic; confine each wrapper to one worker (games themselves are
    immutable and safe to share).
    """

    def __init__(self, inner: Game, calls_limit: int | None = None, memoize: bool = False):
        self.inner = inner
        self.d = inner.d
        self.calls_limit = calls_limit
        self.calls_used = 0
        self._seen: dict[int, float] = {}
        self._memoize = memoize

    @property
    def distinct_calls(self) -> int:
        return len(self._seen)

    def value(self, mask: int) -> float:
        if self.calls_limit is not None and self.calls_used >= self.calls_limit:
            raise BudgetExceededError(
                f"evaluation limit of {self.calls_limit} calls exhausted"
            )
        self.calls_used += 1
        if mask in self._seen:
            if self._memoize:
                return self._seen[mask]
            val = self.inner.value(mask)
        else:
            val = self.inner.value(mask)
            self._seen[mask] = val
        return val


class ShiftedGame:
    """Empty-shifted view: value0(T) = value(T) - value(empty).

    The empty-set value is fetched once on first use and cached, so a run
    pays for it exactly one evaluation; ``value0(0)`` is exactly 0.0 and
    never triggers a second call.
    """

    def __init__(self, inner: Game):
        self.inner = inner
        self.d = inner.d
        self._base: float | None = None

    @property
    def base(self) -> float:
        if self._base is None:
            self._base = self.inner.value(0)
        return self._base

    def value0(self, mask: int) -> float:
        if mask == 0:
            _ = self.base
            return 0.0
        return self.inner.value(mask) - self.base


def soum_random(d: int, n_terms: int, seed: int, max_order: int) -> SoumGame:
    """Draw a random sum-of-unanimity game.

    Each subset is drawn by first picking its size uniformly from
    1..max_order, then a uniform subset of that size; coefficients are
    uniform on [0, 1]. The draw order (size, members, coefficient per term)
    is fixed, so equal seeds give identical games.
    """
    check_player_count(d)
    if n_terms < 1:
        raise SchemaError("need at least one unanimity term")
    if not 1 <= max_order <= d:
        raise SchemaError(f"max_order must be in 1..{d}, got {max_order}")
    rng = np.random.default_rng(seed)
    terms = []
    for _ in range(n_terms):
        size = int(rng.integers(1, max_order + 1))
        members = rng.choice(d, size=size, replace=False)
        coef = float(rng.random())
        terms.append((mask_of(int(i) for i in members), coef))
    return SoumGame(d, terms)


def tabular_from_game(game: Game) -> TabularGame:
    """Exhaustively evaluate a game into a table, one call per coalition."""
    if game.d > MAX_TABULAR_PLAYERS:
        raise CapacityError(
            f"cannot materialize 2^{game.d} values (cap d={MAX_TABULAR_PLAYERS})"
        )
    values = np.empty(1 << game.d)
    for mask in range(1 << game.d):
        values[mask] = game.value(mask)
    return TabularGame(game.d, values)


def value_table(game: Game) -> np.ndarray:
    """Full value table of a game, reusing a tabular game's storage."""
    if isinstance(game, TabularGame):
        return game.values
    return tabular_from_game(game).values


# --- game files ------------------------------------------------------------
#
# Tabular: {"d": int, "empty_value_included": true, "values": [2^d floats]}
# with values indexed by coalition bitmask (player 0 at bit 0).
# SOUM: {"d": int, "terms": [{"players": [ints], "coefficient": float}]}.


def game_to_dict(game: Game) -> dict:
    if isinstance(game, SoumGame):
        return {
            "d": game.d,
            "terms": [
                {"players": players_of(q), "coefficient": a} for q, a in game.terms
            ],
        }
    if isinstance(game, TabularGame):
        return {
            "d": game.d,
            "empty_value_included": True,
            "values": [float(v) for v in game.values],
        }
    raise SchemaError(f"cannot serialize game of type {type(game).__name__}")


def game_from_dict(data: dict) -> Game:
    if not isinstance(data, dict) or "d" not in data:
        raise SchemaError("game file must be a JSON object with a 'd' field")
    d = data["d"]
    if not isinstance(d, int):
        raise SchemaError("'d' must be an integer")
    if "terms" in data:
        terms = []
        for entry in data["terms"]:
            players = entry.get("players")
            coef = entry.get("coefficient")
            if players is None or coef is None:
                raise SchemaError("each term needs 'players' and 'coefficient'")
            terms.append((mask_of(players), float(coef)))
        return SoumGame(d, terms)
    if "values" in data:
        if data.get("empty_value_included") is not True:
            raise SchemaError("tabular files must set 'empty_value_included': true")
        values = data["values"]
        if any(not math.isfinite(v) for v in values):
            raise SchemaError("tabular game values must all be finite")
        return TabularGame(d, values)
    raise SchemaError("game file needs either 'terms' (SOUM) or 'values' (tabular)")


def load_game(path: str) -> Game:
    with open(path) as fh:
        return game_from_dict(json.load(fh))


def save_game(game: Game, path: str) -> None:
    """Write a game file atomically (temp file + rename)."""
    payload = json.dumps(game_to_dict(game), indent=2)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
