"""WL-ROC and SW-ROC curves for paired comparison models.

Both constructions work on *score levels*: the distinct values of the stronger-side
win probability ``q_hat`` with the comparison and win counts of every pair at that
level merged together. Equal scores share a level, which is what the half-weight tie
terms of the Mann-Whitney form of the c-statistics require.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
import numpy.typing as npt
from scipy.integrate import trapezoid
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .data import PairCounts
from .errors import DegenerateClassError
from .fit import LinkFunction, ProbMatrix, StrengthEstimates, get_link, predict_probs

logger = logging.getLogger(__name__)

Array = npt.NDArray[np.float64]

IDENTITY_TOLERANCE = 1e-9
PAIRWISE_CHUNK = 1024


class CurveKind(str, Enum):
    WL = "wl"
    SW = "sw"


class Provenance(str, Enum):
    ESTIMATED = "estimated"
    TRUE = "true"
    LIMITING = "limiting"


@dataclass(frozen=True)
class RankedPairs:
    """Played pairs ordered by ``q_hat`` with counts seen from the stronger team."""

    q_sorted: Array
    n_q: npt.NDArray[np.int64]
    w_q: Array
    strong: npt.NDArray[np.intp]
    weak: npt.NDArray[np.intp]
    W_hat: float
    N: int
    tie_groups: Tuple[Tuple[str, ...], ...]
    R0: int
    N0: float

    @property
    def is_tie(self) -> npt.NDArray[np.bool_]:
        return self.q_sorted == 0.5

    def levels(self) -> Tuple[Array, Array, Array]:
        """Distinct q levels (ascending) with merged comparison and stronger-side win counts."""
        scores, inverse = np.unique(self.q_sorted, return_inverse=True)
        n_levels = np.bincount(inverse, weights=self.n_q, minlength=len(scores))
        w_levels = np.bincount(inverse, weights=self.w_q, minlength=len(scores))
        return scores, n_levels, w_levels

    def level_ranks(self) -> Tuple[Array, Array]:
        """``A`` per level: comparisons on lower levels plus half of the level's own."""
        _, n_levels, w_levels = self.levels()
        ranks = np.cumsum(n_levels) - 0.5 * n_levels
        return ranks, w_levels


@dataclass(frozen=True)
class ScoreLevels:
    kind: CurveKind
    scores: Array
    pos: Array
    neg: Array

    def knots(self) -> Array:
        # sweep the threshold from above the top score down to below the lowest one
        tp = np.cumsum(self.pos[::-1])
        fp = np.cumsum(self.neg[::-1])
        tp = tp / tp[-1] if len(tp) and tp[-1] > 0 else tp
        fp = fp / fp[-1] if len(fp) and fp[-1] > 0 else fp
        points = np.vstack([[0.0, 0.0], np.column_stack([fp, tp]), [1.0, 1.0]])
        return _dedup(points)


@dataclass(frozen=True)
class RocCurve:
    kind: CurveKind
    provenance: Provenance
    knots: Array

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=np.float64)
        if knots.ndim != 2 or knots.shape[1] != 2 or len(knots) < 2:
            raise ValueError("knots must be a (K, 2) array with K >= 2")
        if np.any(np.diff(knots, axis=0) < 0):
            raise ValueError("knots must be nondecreasing in both coordinates")
        if not (np.array_equal(knots[0], [0.0, 0.0]) and np.array_equal(knots[-1], [1.0, 1.0])):
            raise ValueError("knots must run from (0, 0) to (1, 1)")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @property
    def fpr(self) -> Array:
        return self.knots[:, 0]

    @property
    def tpr(self) -> Array:
        return self.knots[:, 1]


@dataclass(frozen=True)
class CStatReport:
    c_wl: float
    c_sw: float
    W_hat: float
    N: int
    identity_residual: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "c_wl": self.c_wl,
            "c_sw": self.c_sw,
            "W_hat": self.W_hat,
            "N": self.N,
            "identity_residual": self.identity_residual,
        }


@dataclass(frozen=True)
class RocAnalysis:
    ranked: RankedPairs
    wl: RocCurve
    sw: Optional[RocCurve]
    c_wl: float
    c_sw: Optional[float]
    report: Optional[CStatReport]


def _dedup(points: Array) -> Array:
    keep = np.ones(len(points), dtype=bool)
    keep[1:] = np.any(points[1:] != points[:-1], axis=1)
    return points[keep]


def _tie_groups(
    estimates: StrengthEstimates, probs: ProbMatrix
) -> Tuple[Tuple[str, ...], ...]:
    """Teams joined by a predicted probability of exactly one half, closed transitively."""
    even = probs.p_hat == 0.5
    np.fill_diagonal(even, False)
    _, labels = connected_components(csr_matrix(even), directed=False)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    groups = []
    for label in np.argsort(first, kind="stable"):
        members = np.flatnonzero(inverse == label)
        groups.append(tuple(estimates.teams[i] for i in members))
    return tuple(groups)


def rank_pairs(counts: PairCounts, probs: ProbMatrix, estimates: StrengthEstimates) -> RankedPairs:
    """Order played pairs by ``q_hat = max(p_hat, 1 - p_hat)``.

    The team with the larger strength is the reference. A pair whose strengths tie
    (``q_hat == 0.5``) takes its lower-index team as the reference and credits it with
    half of the pair's games.
    """
    rows, cols = counts.pairs()
    p = probs.p_hat[rows, cols]
    first_stronger = p >= 0.5
    q = np.where(first_stronger, p, probs.p_hat[cols, rows])
    strong = np.where(first_stronger, rows, cols)
    weak = np.where(first_stronger, cols, rows)
    n_q = counts.n[rows, cols]
    w_q = counts.w[strong, weak].astype(np.float64)
    tie = q == 0.5
    w_q[tie] = n_q[tie] / 2.0

    order = np.argsort(q, kind="stable")
    groups = _tie_groups(estimates, probs)
    r0 = sum(len(group) * (len(group) - 1) // 2 for group in groups)
    n0 = float(n_q[tie].sum()) / 2.0
    ranked = RankedPairs(
        q_sorted=q[order],
        n_q=n_q[order],
        w_q=w_q[order],
        strong=strong[order],
        weak=weak[order],
        W_hat=float(w_q.sum()),
        N=int(n_q.sum()),
        tie_groups=groups,
        R0=r0,
        N0=n0,
    )
    logger.debug("ranked %d pairs, W_hat=%s, N=%d, R0=%d", len(q), ranked.W_hat, ranked.N, r0)
    return ranked


def _check_classes(W_hat: float, N: int) -> None:
    if not 0 < W_hat < N:
        raise DegenerateClassError(
            f"SW-ROC needs both strong and weak winners, got W_hat={W_hat} of N={N}"
        )


def _merge(scores: Array, pos: Array, neg: Array) -> Tuple[Array, Array, Array]:
    merged, inverse = np.unique(scores, return_inverse=True)
    return (
        merged,
        np.bincount(inverse, weights=pos, minlength=len(merged)),
        np.bincount(inverse, weights=neg, minlength=len(merged)),
    )


def score_levels(ranked: RankedPairs, kind: CurveKind | str) -> ScoreLevels:
    kind = CurveKind(kind)
    q, n, w = ranked.levels()
    if kind is CurveKind.SW:
        _check_classes(ranked.W_hat, ranked.N)
        return ScoreLevels(kind=kind, scores=q, pos=w, neg=n - w)
    # each game counts once as a winner's score and once as a loser's score
    scores, pos, neg = _merge(
        np.concatenate([1.0 - q, q]),
        np.concatenate([n - w, w]),
        np.concatenate([w, n - w]),
    )
    return ScoreLevels(kind=kind, scores=scores, pos=pos, neg=neg)


def wl_curve(
    ranked: RankedPairs, N: Optional[int] = None, provenance: Provenance = Provenance.ESTIMATED
) -> RocCurve:
    levels = score_levels(ranked, CurveKind.WL)
    return RocCurve(kind=CurveKind.WL, provenance=Provenance(provenance), knots=levels.knots())


def sw_curve(
    ranked: RankedPairs, N: Optional[int] = None, provenance: Provenance = Provenance.ESTIMATED
) -> RocCurve:
    N = ranked.N if N is None else N
    _check_classes(ranked.W_hat, N)
    levels = score_levels(ranked, CurveKind.SW)
    return RocCurve(kind=CurveKind.SW, provenance=Provenance(provenance), knots=levels.knots())


def auc(curve: RocCurve) -> float:
    return float(trapezoid(curve.tpr, curve.fpr))


def _pairwise_sum(
    x: Array, y: Array, wx: Optional[Array], wy: Optional[Array]
) -> Tuple[float, float]:
    """Weighted count of ``x > y`` plus half of ``x == y`` over all pairs, and the total weight."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if wx is None and wy is None:
        doubled = 0
        for start in range(0, len(x), PAIRWISE_CHUNK):
            block = x[start:start + PAIRWISE_CHUNK, None]
            doubled += 2 * int(np.count_nonzero(block > y)) + int(np.count_nonzero(block == y))
        return doubled / 2.0, float(len(x) * len(y))
    wx = np.ones(len(x)) if wx is None else np.asarray(wx, dtype=np.float64)
    wy = np.ones(len(y)) if wy is None else np.asarray(wy, dtype=np.float64)
    total = 0.0
    for start in range(0, len(x), PAIRWISE_CHUNK):
        block = x[start:start + PAIRWISE_CHUNK, None]
        scored = (block > y) + 0.5 * (block == y)
        total += float(wx[start:start + PAIRWISE_CHUNK] @ (scored @ wy))
    return total, float(wx.sum() * wy.sum())


def c_wl_pairwise(
    p_winners: Array,
    p_losers: Array,
    winner_weights: Optional[Array] = None,
    loser_weights: Optional[Array] = None,
) -> float:
    """Share of (winner, loser) game pairs where the winner had the higher predicted probability."""
    score, total = _pairwise_sum(p_winners, p_losers, winner_weights, loser_weights)
    if total == 0:
        raise DegenerateClassError("WL c-statistic needs at least one game")
    return score / total


def c_sw_pairwise(
    p_strong: Array,
    p_weak: Array,
    strong_weights: Optional[Array] = None,
    weak_weights: Optional[Array] = None,
) -> float:
    score, total = _pairwise_sum(p_strong, p_weak, strong_weights, weak_weights)
    if total == 0:
        raise DegenerateClassError("SW c-statistic needs both strong and weak winners")
    return score / total


def game_scores(counts: PairCounts, probs: ProbMatrix) -> Tuple[Array, Array]:
    """Per-game probabilities of the winner and of the loser (the stacked WL data set)."""
    rows, cols = counts.pairs()
    p_first = probs.p_hat[rows, cols]
    p_second = probs.p_hat[cols, rows]
    first_wins = counts.w[rows, cols]
    second_wins = counts.w[cols, rows]
    winners = np.concatenate([np.repeat(p_first, first_wins), np.repeat(p_second, second_wins)])
    losers = np.concatenate([np.repeat(p_second, first_wins), np.repeat(p_first, second_wins)])
    return winners, losers


def strength_scores(ranked: RankedPairs) -> Tuple[Array, Array, Array, Array]:
    """Stronger-side probabilities of strong-winner and weak-winner games, with weights.

    Games of tied pairs appear once in each class carrying weight ``n / 2``.
    """
    tie = ranked.is_tie
    plain = ~tie
    strong_wins = ranked.w_q[plain].astype(np.int64)
    weak_wins = ranked.n_q[plain] - strong_wins
    q_plain = ranked.q_sorted[plain]
    half = ranked.n_q[tie] / 2.0
    p_strong = np.concatenate([np.repeat(q_plain, strong_wins), ranked.q_sorted[tie]])
    p_weak = np.concatenate([np.repeat(q_plain, weak_wins), ranked.q_sorted[tie]])
    strong_weights = np.concatenate([np.ones(strong_wins.sum()), half])
    weak_weights = np.concatenate([np.ones(weak_wins.sum()), half])
    return p_strong, p_weak, strong_weights, weak_weights


def c_wl_fast(ranked: RankedPairs, N: Optional[int] = None) -> float:
    N = ranked.N if N is None else N
    ranks, wins = ranked.level_ranks()
    return float(2.0 * np.dot(ranks, wins) / N**2)


def c_sw_fast(ranked: RankedPairs, N: Optional[int] = None) -> float:
    N = ranked.N if N is None else N
    W = ranked.W_hat
    _check_classes(W, N)
    ranks, wins = ranked.level_ranks()
    return float((np.dot(ranks, wins) - 0.5 * W**2) / (W * (N - W)))


def verify_identity(c_wl: float, c_sw: float, W_hat: float, N: int) -> CStatReport:
    """Check ``N^2 c_wl = 2 W (N - W) c_sw + W^2`` and report the residual."""
    residual = N**2 * c_wl - 2.0 * W_hat * (N - W_hat) * c_sw - W_hat**2
    if abs(residual) > IDENTITY_TOLERANCE * N**2:
        logger.warning("c-statistic identity residual %.3e exceeds tolerance", residual)
    return CStatReport(c_wl=c_wl, c_sw=c_sw, W_hat=W_hat, N=N, identity_residual=float(residual))


def analyze(
    counts: PairCounts,
    estimates: StrengthEstimates,
    link: Optional[LinkFunction] = None,
    method: str = "both",
    provenance: Provenance = Provenance.ESTIMATED,
) -> RocAnalysis:
    link = link or get_link(estimates.link)
    probs = predict_probs(estimates, link)
    ranked = rank_pairs(counts, probs, estimates)
    wl = wl_curve(ranked, provenance=provenance)
    c_wl = c_wl_fast(ranked)
    sw = None
    c_sw = None
    report = None
    if method in ("sw", "both"):
        sw = sw_curve(ranked, provenance=provenance)
        c_sw = c_sw_fast(ranked)
        report = verify_identity(c_wl, c_sw, ranked.W_hat, ranked.N)
    return RocAnalysis(ranked=ranked, wl=wl, sw=sw, c_wl=c_wl, c_sw=c_sw, report=report)
