import numpy as np
import pytest

from siq import SoumGame, TabularGame, soum_random, tabular_from_game


def random_tabular(d: int, seed: int) -> TabularGame:
    rng = np.random.default_rng(seed)
    return TabularGame(d, rng.standard_normal(1 << d))


def random_soum(seed: int, d_max: int = 10, n_max: int = 10) -> SoumGame:
    rng = np.random.default_rng(seed)
    d = int(rng.integers(4, d_max + 1))
    n = int(rng.integers(1, n_max + 1))
    return soum_random(d, n, seed=int(rng.integers(0, 2**31)), max_order=d)


@pytest.fixture
def unanimity_pair() -> SoumGame:
    """Two-player unanimity game on players {0, 1} embedded in d=3."""
    return SoumGame(3, [(0b011, 1.0)])


@pytest.fixture
def additive_game() -> TabularGame:
    """Additive game on d=6: value(T) = sum of fixed per-player weights."""
    d = 6
    weights = np.array([0.5, -1.0, 2.0, 0.25, 1.5, -0.75])
    values = [
        sum(weights[i] for i in range(d) if mask >> i & 1) for mask in range(1 << d)
    ]
    return TabularGame(d, values)


def as_tabular(game) -> TabularGame:
    return game if isinstance(game, TabularGame) else tabular_from_game(game)
