"""True and limiting c-statistics and their standard errors.

Win counts of the stronger side are independent ``Binomial(n_r, q_r)`` across pairs.
``S = sum_r A_r w_r`` and ``W = sum_r w_r`` drive both statistics, where ``A_r`` is the
number of comparisons on lower q levels plus half of those on the pair's own level.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import numpy.typing as npt

from .data import PairCounts
from .errors import DegenerateClassError, TaylorRadicandWarning
from .fit import LinkFunction, LOGISTIC, predict_probs, strengths_from_true
from .roc import (
    CurveKind,
    Provenance,
    RocAnalysis,
    RocCurve,
    ScoreLevels,
    analyze,
    auc,
    rank_pairs,
    _merge,
)

logger = logging.getLogger(__name__)

Array = npt.NDArray[np.float64]

INEQUALITY_SLACK = 1e-12
# negative Taylor radicands smaller than this fraction of the variance terms are rounding noise
RADICAND_SLACK = 1e-9


@dataclass(frozen=True)
class TrueModel:
    q: Array
    n_q: Array

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=np.float64)
        n_q = np.asarray(self.n_q, dtype=np.float64)
        if q.ndim != 1 or q.shape != n_q.shape or len(q) == 0:
            raise ValueError("q and n_q must be nonempty vectors of equal length")
        if np.any(q < 0.5) or np.any(q > 1.0):
            raise ValueError("q entries must lie in [0.5, 1]")
        if np.any(np.diff(q) < 0):
            raise ValueError("q must be sorted in nondecreasing order")
        if np.any(n_q < 0) or n_q.sum() <= 0:
            raise ValueError("n_q must be nonnegative with a positive total")
        q.setflags(write=False)
        n_q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "n_q", n_q)

    @classmethod
    def uniform(cls, q: npt.ArrayLike, n: float) -> "TrueModel":
        q = np.asarray(q, dtype=np.float64)
        return cls(q=q, n_q=np.full(len(q), float(n)))

    @classmethod
    def from_strengths(
        cls, mu: npt.ArrayLike, counts: PairCounts, link: LinkFunction = LOGISTIC
    ) -> "TrueModel":
        truth = strengths_from_true(mu, counts.teams, link)
        ranked = rank_pairs(counts, predict_probs(truth, link), truth)
        return cls(q=ranked.q_sorted, n_q=ranked.n_q.astype(np.float64))

    @property
    def R(self) -> int:
        return len(self.q)

    @property
    def N(self) -> float:
        return float(self.n_q.sum())

    @property
    def d(self) -> Array:
        return self.n_q / self.n_q.sum()

    def integer_counts(self) -> npt.NDArray[np.int64]:
        counts = np.rint(self.n_q).astype(np.int64)
        if not np.array_equal(counts, self.n_q):
            raise ValueError("this computation needs integer comparison counts")
        return counts


@dataclass(frozen=True)
class MomentSet:
    B1: float
    B2: float
    B3: float
    B4: float
    C1: float
    C2: float
    D1: float
    D2: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class WlSwComparison:
    c_wl: float
    c_sw: float
    margin: float
    holds: bool
    equality: bool


def pair_ranks(model: TrueModel) -> Array:
    """``A_r`` for every pair, with pairs of equal q sharing their level's value."""
    _, inverse = np.unique(model.q, return_inverse=True)
    n_levels = np.bincount(inverse, weights=model.n_q)
    level_ranks = np.cumsum(n_levels) - 0.5 * n_levels
    return level_ranks[inverse]


def true_c_stats(
    model: TrueModel, w_q: npt.ArrayLike, N: Optional[float] = None
) -> Tuple[float, float]:
    """c^wl and c^sw of a realized season ``w_q`` (stronger-side wins aligned with ``model.q``)."""
    N = model.N if N is None else N
    w = np.asarray(w_q, dtype=np.float64)
    if w.shape != model.q.shape or np.any(w < 0) or np.any(w > model.n_q):
        raise ValueError("w_q must align with q and satisfy 0 <= w_q <= n_q")
    S = float(np.dot(pair_ranks(model), w))
    W = float(w.sum())
    if not 0 < W < N:
        raise DegenerateClassError(f"c^sw is undefined with W={W} of N={N}")
    return 2.0 * S / N**2, (S - 0.5 * W**2) / (W * (N - W))


def _check_sorted(q: Array) -> None:
    if q.ndim != 1 or len(q) == 0:
        raise ValueError("q must be a nonempty vector")
    if np.any(q < 0.5) or np.any(q > 1.0) or np.any(np.diff(q) < 0):
        raise ValueError("q must be nondecreasing with entries in [0.5, 1]")


def limiting_c_stats(q: npt.ArrayLike) -> Tuple[float, float]:
    """Limiting c-statistics when every pair meets equally often."""
    q = np.asarray(q, dtype=np.float64)
    _check_sorted(q)
    R = len(q)
    U = float(np.dot(np.arange(1, R + 1) - 0.5, q))
    total = float(q.sum())
    if total >= R:
        raise DegenerateClassError("limiting c^sw is undefined when every q equals 1")
    return 2.0 * U / R**2, (U - 0.5 * total**2) / (total * (R - total))


def check_wl_ge_sw(q: npt.ArrayLike) -> WlSwComparison:
    q = np.asarray(q, dtype=np.float64)
    c_wl, c_sw = limiting_c_stats(q)
    margin = c_wl - c_sw
    return WlSwComparison(
        c_wl=c_wl,
        c_sw=c_sw,
        margin=margin,
        holds=margin >= -INEQUALITY_SLACK,
        equality=bool(np.all(q == 0.5)),
    )


def parity_bound(q: npt.ArrayLike) -> Tuple[float, float]:
    """``U = sum (r - 1/2) q_(r)`` and its upper bound ``V^2 R^2 / (2 - 4 V (1 - V))``."""
    q = np.asarray(q, dtype=np.float64)
    _check_sorted(q)
    R = len(q)
    U = float(np.dot(np.arange(1, R + 1) - 0.5, q))
    V = float(q.mean())
    return U, V**2 * R**2 / (2.0 - 4.0 * V * (1.0 - V))


def se_c_wl(model: TrueModel, N: Optional[float] = None) -> float:
    N = model.N if N is None else N
    A = pair_ranks(model)
    variance = np.sum(A**2 * model.n_q * model.q * (1.0 - model.q))
    return float(2.0 / N**2 * np.sqrt(variance))


def _bernoulli_cumulants(q: Array) -> Tuple[Array, Array, Array, Array]:
    v = q * (1.0 - q)
    return q, v, v * (1.0 - 2.0 * q), v * (1.0 - 6.0 * v)


def moments(model: TrueModel) -> MomentSet:
    """Exact moments of ``W`` and ``S`` under independent binomial wins.

    Joint cumulants of ``(W, S)`` add over pairs because the pairs are independent; each
    pair's cumulants are ``n_r`` times the Bernoulli ones, weighted by ``A_r`` per power
    of ``S``. Raw moments follow from the cumulant-to-moment relations.
    """
    n = model.n_q
    A = pair_ranks(model)
    k1, k2, k3, k4 = (n * kappa for kappa in _bernoulli_cumulants(model.q))
    w1, w2, w3, w4 = k1.sum(), k2.sum(), k3.sum(), k4.sum()
    s1 = np.dot(A, k1)
    s2 = np.dot(A**2, k2)
    ws = np.dot(A, k2)
    wws = np.dot(A, k3)
    return MomentSet(
        B1=float(w1),
        B2=float(w2 + w1**2),
        B3=float(w3 + 3 * w2 * w1 + w1**3),
        B4=float(w4 + 4 * w3 * w1 + 3 * w2**2 + 6 * w2 * w1**2 + w1**4),
        C1=float(s1),
        C2=float(s2 + s1**2),
        D1=float(ws + w1 * s1),
        D2=float(wws + w2 * s1 + 2 * ws * w1 + w1**2 * s1),
    )


def se_c_sw_taylor(moment_set: MomentSet, N: float) -> float:
    """First-order Taylor (delta method) standard error of ``c^sw = X / Y``.

    ``X = S - W^2 / 2`` and ``Y = W (N - W)``.
    """
    B1, B2, B3, B4 = moment_set.B1, moment_set.B2, moment_set.B3, moment_set.B4
    C1, C2, D1, D2 = moment_set.C1, moment_set.C2, moment_set.D1, moment_set.D2
    mu_x = C1 - 0.5 * B2
    mu_y = N * B1 - B2
    if mu_x == 0 or mu_y == 0:
        raise DegenerateClassError("Taylor expansion point has a zero mean")
    var_x = C2 - D2 + 0.25 * B4 - mu_x**2
    var_y = N**2 * B2 - 2 * N * B3 + B4 - mu_y**2
    cov_xy = N * D1 - D2 - 0.5 * N * B3 + 0.5 * B4 - mu_x * mu_y
    if mu_x < 0:
        logger.warning("Taylor point has a negative numerator mean %.4g", mu_x)
    radicand = var_x / mu_x**2 - 2 * cov_xy / (mu_x * mu_y) + var_y / mu_y**2
    if radicand < 0:
        scale = abs(var_x / mu_x**2) + abs(var_y / mu_y**2)
        if radicand < -RADICAND_SLACK * scale:
            warnings.warn(
                f"negative Taylor radicand {radicand:.3e} clamped to zero",
                TaylorRadicandWarning,
                stacklevel=2,
            )
        else:
            logger.debug("Taylor radicand %.3e within rounding of zero, clamped", radicand)
        radicand = 0.0
    return float(abs(mu_x / mu_y) * np.sqrt(radicand))


def limiting_levels(model: TrueModel, kind: CurveKind | str) -> ScoreLevels:
    kind = CurveKind(kind)
    q, d = model.q, model.d
    if kind is CurveKind.SW:
        if not np.any((1.0 - q) * d > 0):
            raise DegenerateClassError("limiting SW-ROC needs a pair with q < 1")
        scores, pos, neg = _merge(q, q * d, (1.0 - q) * d)
    else:
        scores, pos, neg = _merge(
            np.concatenate([1.0 - q, q]),
            np.concatenate([(1.0 - q) * d, q * d]),
            np.concatenate([q * d, (1.0 - q) * d]),
        )
    return ScoreLevels(kind=kind, scores=scores, pos=pos, neg=neg)


def limiting_curve(model: TrueModel, kind: CurveKind | str) -> RocCurve:
    levels = limiting_levels(model, kind)
    return RocCurve(kind=levels.kind, provenance=Provenance.LIMITING, knots=levels.knots())


def limiting_c_stats_design(model: TrueModel) -> Tuple[float, float]:
    """Limiting c-statistics for any design, as areas under the limiting curves."""
    return auc(limiting_curve(model, CurveKind.WL)), auc(limiting_curve(model, CurveKind.SW))


def true_curves(
    counts: PairCounts, mu: npt.ArrayLike, link: LinkFunction = LOGISTIC, method: str = "both"
) -> RocAnalysis:
    truth = strengths_from_true(mu, counts.teams, link, counts)
    return analyze(counts, truth, link, method=method, provenance=Provenance.TRUE)
