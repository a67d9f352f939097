from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from pcroc.data import PairCounts, check_connectivity  # noqa: E402


def random_counts(rng: np.random.Generator, m: int, max_games: int = 20) -> PairCounts:
    """A random schedule and outcome that satisfies Ford's condition."""
    teams = [f"team{i}" for i in range(m)]
    while True:
        n = np.triu(rng.integers(0, max_games + 1, size=(m, m)), 1)
        n = n + n.T
        p = rng.uniform(0.1, 0.9, size=(m, m))
        upper = np.triu(rng.binomial(n, p), 1)
        w = upper + np.triu(n - upper, 1).T
        counts = PairCounts(teams=tuple(teams), n=n, w=w)
        if check_connectivity(counts).ok:
            return counts


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture
def three_team_counts() -> PairCounts:
    # A beats B 7 of 10, A beats C 9 of 12, B beats C 5 of 8
    w = np.array([[0, 7, 9], [3, 0, 5], [3, 3, 0]])
    return PairCounts.from_wins(("A", "B", "C"), w)
