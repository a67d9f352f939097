"""ROC distance between curves and the Monte Carlo experiments built on it.

Every replication draws from its own Philox stream keyed by (experiment, grid point,
replication), so results do not depend on how replications are spread over workers.
"""

from __future__ import annotations

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy import stats
from scipy.integrate import trapezoid

from .bus import EventBus, serialize_events
from .config import FitConfig, MetricConfig, SimulationConfig
from .data import PairCounts
from .errors import ConfigError, ConnectivityError, DegenerateClassError
from .fit import (
    LOGISTIC,
    LinkFunction,
    ProbMatrix,
    StrengthEstimates,
    fit_mle,
    predict_probs,
    strengths_from_true,
)
from .inference import (
    TrueModel,
    limiting_levels,
    moments,
    pair_ranks,
    se_c_sw_taylor,
    se_c_wl,
    true_c_stats,
)
from .roc import CurveKind, RankedPairs, RocAnalysis, ScoreLevels, analyze, rank_pairs, score_levels, _dedup

logger = logging.getLogger(__name__)

Array = npt.NDArray[np.float64]

SE_DECAY = 1
CONVERGENCE = 2
TRUE_STATS = 3

MIN_SE_REPS = 100
MAX_RESAMPLES = 1000
BLOCK_SIZE = 50

SE_COLUMNS = (
    "se_c_wl_emp",
    "se_c_wl_true_emp",
    "se_c_wl_exact",
    "se_c_sw_emp",
    "se_c_sw_true_emp",
    "se_c_sw_taylor",
)
DISTANCE_COLUMNS = ("wl_to_true", "wl_to_limit", "sw_to_true", "sw_to_limit")


@dataclass(frozen=True)
class ThresholdCurve:
    """Right-continuous step function ``theta -> (FPR, TPR)`` of the rule ``score > theta``.

    ``values[0]`` holds below the lowest breakpoint, ``values[k]`` on
    ``[breakpoints[k-1], breakpoints[k])`` and ``values[-1] == (0, 0)`` from the top score on.
    """

    kind: CurveKind
    breakpoints: Array
    values: Array

    def __post_init__(self) -> None:
        breakpoints = np.asarray(self.breakpoints, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if breakpoints.ndim != 1 or values.shape != (len(breakpoints) + 1, 2):
            raise ValueError("values must hold one (FPR, TPR) row per interval")
        if np.any(np.diff(breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        breakpoints.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_levels(cls, levels: ScoreLevels) -> "ThresholdCurve":
        rates = []
        for mass in (levels.neg, levels.pos):
            tail = np.append(np.cumsum(mass[::-1])[::-1], 0.0)
            rates.append(tail / tail[0] if tail[0] > 0 else tail)
        return cls(kind=levels.kind, breakpoints=levels.scores, values=np.column_stack(rates))

    def __call__(self, theta: npt.ArrayLike) -> Array:
        return self.values[np.searchsorted(self.breakpoints, theta, side="right")]

    def knots(self) -> Array:
        return _dedup(self.values[::-1])

    def area(self) -> float:
        points = self.knots()
        return float(trapezoid(points[:, 1], points[:, 0]))


def as_threshold_curve(
    source: RankedPairs | ScoreLevels | TrueModel, kind: CurveKind | str = CurveKind.WL
) -> ThresholdCurve:
    """Threshold form of an estimated, true or limiting curve."""
    if isinstance(source, ScoreLevels):
        levels = source
    elif isinstance(source, TrueModel):
        levels = limiting_levels(source, kind)
    else:
        levels = score_levels(source, kind)
    return ThresholdCurve.from_levels(levels)


_RHO: Dict[str, Callable[[Array], Array]] = {
    "euclidean": lambda gap: np.hypot(gap[:, 0], gap[:, 1]),
    "manhattan": lambda gap: np.abs(gap).sum(axis=1),
    "chebyshev": lambda gap: np.abs(gap).max(axis=1),
}


def roc_distance(f: ThresholdCurve, g: ThresholdCurve, cfg: Optional[MetricConfig] = None) -> float:
    """``(integral_0^1 rho(f(theta), g(theta))^z dtheta)^(1/z)``, integrated exactly."""
    cfg = cfg or MetricConfig()
    edges = np.union1d(np.concatenate([f.breakpoints, g.breakpoints]), [0.0, 1.0])
    edges = edges[(edges >= 0.0) & (edges <= 1.0)]
    left = edges[:-1]
    gap = _RHO[cfg.rho](f(left) - g(left))
    return float(np.dot(np.diff(edges), gap**cfg.z) ** (1.0 / cfg.z))


def replication_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def default_teams(m: int) -> Tuple[str, ...]:
    return tuple(f"T{i + 1:02d}" for i in range(m))


def default_strengths(m: int) -> Array:
    return np.linspace(-1.0, 1.0, m)


def schedule(m: int, n_pairs: int | npt.ArrayLike) -> npt.NDArray[np.int64]:
    """Symmetric games-per-pair matrix from a single count or an explicit matrix."""
    if np.ndim(n_pairs) == 0:
        n = np.full((m, m), int(n_pairs), dtype=np.int64)
        np.fill_diagonal(n, 0)
    else:
        n = np.array(n_pairs, dtype=np.int64)
    if n.shape != (m, m) or not np.array_equal(n, n.T) or np.any(np.diag(n)) or np.any(n < 0):
        raise ConfigError(f"schedule must be a symmetric {m}x{m} count matrix with zero diagonal")
    return n


@dataclass(frozen=True)
class SeasonSampler:
    """Draws seasons from known strengths over a fixed schedule."""

    teams: Tuple[str, ...]
    n: npt.NDArray[np.int64]
    strong: npt.NDArray[np.intp]
    weak: npt.NDArray[np.intp]
    model: TrueModel
    truth: StrengthEstimates
    probs: ProbMatrix
    link: LinkFunction

    @classmethod
    def build(
        cls,
        mu: npt.ArrayLike,
        n_pairs: int | npt.ArrayLike,
        link: LinkFunction = LOGISTIC,
        teams: Optional[Sequence[str]] = None,
    ) -> "SeasonSampler":
        mu = np.asarray(mu, dtype=np.float64)
        m = len(mu)
        teams = tuple(teams) if teams is not None else default_teams(m)
        if len(teams) != m:
            raise ConfigError(f"{len(teams)} team names for {m} strengths")
        n = schedule(m, n_pairs)
        truth = strengths_from_true(mu, teams, link)
        rows, cols = np.triu_indices(m, 1)
        played = n[rows, cols] > 0
        if not played.any():
            raise ConfigError("schedule has no games")
        rows, cols = rows[played], cols[played]
        diff = truth.mu_hat[rows] - truth.mu_hat[cols]
        q = link.forward(np.abs(diff))
        first_stronger = (diff >= 0) | (q == 0.5)
        strong = np.where(first_stronger, rows, cols)
        weak = np.where(first_stronger, cols, rows)
        order = np.argsort(q, kind="stable")
        return cls(
            teams=teams,
            n=n,
            strong=strong[order],
            weak=weak[order],
            model=TrueModel(q=q[order], n_q=n[rows, cols][order]),
            truth=truth,
            probs=predict_probs(truth, link),
            link=link,
        )

    def draw(self, rng: np.random.Generator) -> Tuple[PairCounts, npt.NDArray[np.int64]]:
        """One season, with the stronger side's wins aligned to ``model.q``."""
        n_q = self.n[self.strong, self.weak]
        w_q = rng.binomial(n_q, self.model.q)
        w = np.zeros_like(self.n)
        w[self.strong, self.weak] = w_q
        w[self.weak, self.strong] = n_q - w_q
        return PairCounts(teams=self.teams, n=self.n, w=w), w_q


def simulate_season(
    mu: npt.ArrayLike,
    n_pairs: int | npt.ArrayLike,
    link: LinkFunction = LOGISTIC,
    rng: Optional[np.random.Generator] = None,
    teams: Optional[Sequence[str]] = None,
) -> PairCounts:
    rng = rng if rng is not None else np.random.default_rng()
    counts, _ = SeasonSampler.build(mu, n_pairs, link, teams).draw(rng)
    return counts


def simulate_true_c_stats(model: TrueModel, reps: int, seed: int) -> Tuple[Array, Array]:
    """Monte Carlo draws of the true c-statistics; c^sw is NaN for seasons without both classes."""
    rng = replication_rng(seed, TRUE_STATS)
    wins = rng.binomial(model.integer_counts(), model.q, size=(reps, model.R)).astype(np.float64)
    S = wins @ pair_ranks(model)
    W = wins.sum(axis=1)
    N = model.N
    c_wl = 2.0 * S / N**2
    with np.errstate(divide="ignore", invalid="ignore"):
        c_sw = np.where((W > 0) & (W < N), (S - 0.5 * W**2) / (W * (N - W)), np.nan)
    return c_wl, c_sw


@dataclass(frozen=True)
class Season:
    counts: PairCounts
    w_q: npt.NDArray[np.int64]
    estimates: StrengthEstimates
    analysis: RocAnalysis
    true_stats: Tuple[float, float]
    resamples: int


def draw_estimable_season(
    sampler: SeasonSampler, rng: np.random.Generator, fit_config: FitConfig
) -> Season:
    """Draw until the season satisfies Ford's condition and has both SW classes."""
    for resamples in range(MAX_RESAMPLES + 1):
        counts, w_q = sampler.draw(rng)
        try:
            estimates = fit_mle(counts, sampler.link, fit_config)
            analysis = analyze(counts, estimates, sampler.link)
            true_stats = true_c_stats(sampler.model, w_q)
        except (ConnectivityError, DegenerateClassError):
            continue
        return Season(counts, w_q, estimates, analysis, true_stats, resamples)
    raise DegenerateClassError(f"no estimable season in {MAX_RESAMPLES + 1} draws")


@dataclass
class SimulationResult:
    table: pd.DataFrame
    resamples: int
    events: List[Dict[str, Any]]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": self.table.to_dict(orient="records"),
            "resamples": self.resamples,
            "events": self.events,
        }


def _blocks(reps: int) -> List[Tuple[int, int]]:
    return [(start, min(start + BLOCK_SIZE, reps)) for start in range(0, reps, BLOCK_SIZE)]


async def _run_jobs(jobs: List[Callable[[], Any]], workers: int) -> List[Any]:
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [loop.run_in_executor(pool, job) for job in jobs]
        return await asyncio.gather(*futures)


async def _report(bus: EventBus, source: str, label: str, value: int, seasons: List[Season]) -> int:
    resamples = sum(season.resamples for season in seasons)
    stalled = sum(1 for season in seasons if not season.estimates.converged)
    if resamples:
        await bus.emit(
            "resample", source, "Seasons redrawn",
            f"{resamples} seasons at {label}={value} failed Ford's condition or lacked an SW class",
            **{label: value, "count": resamples},
        )
    if stalled:
        await bus.emit(
            "fit", source, "Fit did not converge",
            f"{stalled} fits at {label}={value} stopped at the iteration limit",
            **{label: value, "count": stalled},
        )
    await bus.emit("progress", source, "Grid point done", f"{label}={value}", **{label: value})
    return resamples


def _se_block(
    sampler: SeasonSampler, seed: int, n: int, start: int, stop: int, fit_config: FitConfig
) -> List[Season]:
    return [
        draw_estimable_season(sampler, replication_rng(seed, SE_DECAY, n, rep), fit_config)
        for rep in range(start, stop)
    ]


async def run_se_decay(
    config: SimulationConfig,
    mu: Optional[npt.ArrayLike] = None,
    link: LinkFunction = LOGISTIC,
    bus: Optional[EventBus] = None,
) -> SimulationResult:
    if config.reps < MIN_SE_REPS:
        raise ConfigError(f"se-decay needs at least {MIN_SE_REPS} replications, got {config.reps}")
    mu = default_strengths(config.teams) if mu is None else np.asarray(mu, dtype=np.float64)
    if len(mu) != config.teams:
        raise ConfigError(f"{len(mu)} strengths given for {config.teams} teams")
    bus = bus or EventBus()
    samplers = {n: SeasonSampler.build(mu, n, link) for n in config.n_grid}
    keys = [(n, start, stop) for n in config.n_grid for start, stop in _blocks(config.reps)]
    jobs = [
        partial(_se_block, samplers[n], config.seed, n, start, stop, config.fit)
        for n, start, stop in keys
    ]
    outputs = await _run_jobs(jobs, config.workers)

    by_n: Dict[int, List[Season]] = {n: [] for n in config.n_grid}
    for (n, _, _), seasons in zip(keys, outputs):
        by_n[n].extend(seasons)

    rows = []
    total_resamples = 0
    for n in config.n_grid:
        seasons = by_n[n]
        model = samplers[n].model
        hat = np.array([(s.analysis.c_wl, s.analysis.c_sw) for s in seasons])
        true = np.array([s.true_stats for s in seasons])
        resamples = await _report(bus, "metricsim.se_decay", "n", n, seasons)
        total_resamples += resamples
        rows.append(
            {
                "n": n,
                "se_c_wl_emp": float(np.std(hat[:, 0], ddof=1)),
                "se_c_wl_true_emp": float(np.std(true[:, 0], ddof=1)),
                "se_c_wl_exact": se_c_wl(model),
                "se_c_sw_emp": float(np.std(hat[:, 1], ddof=1)),
                "se_c_sw_true_emp": float(np.std(true[:, 1], ddof=1)),
                "se_c_sw_taylor": se_c_sw_taylor(moments(model), model.N),
                "resamples": resamples,
            }
        )
        logger.info("se-decay n=%d done (%d resamples)", n, resamples)
    return SimulationResult(
        table=pd.DataFrame(rows),
        resamples=total_resamples,
        events=serialize_events(bus.recent()),
    )


def simulate_se_decay(
    config: SimulationConfig,
    mu: Optional[npt.ArrayLike] = None,
    link: LinkFunction = LOGISTIC,
    bus: Optional[EventBus] = None,
) -> SimulationResult:
    return asyncio.run(run_se_decay(config, mu, link, bus))


def _convergence_block(
    sampler: SeasonSampler,
    limits: Tuple[ThresholdCurve, ThresholdCurve],
    metric: MetricConfig,
    seed: int,
    scale: int,
    start: int,
    stop: int,
    fit_config: FitConfig,
) -> List[Tuple[Season, Tuple[float, float, float, float]]]:
    out = []
    for rep in range(start, stop):
        season = draw_estimable_season(sampler, replication_rng(seed, CONVERGENCE, scale, rep), fit_config)
        true_ranked = rank_pairs(season.counts, sampler.probs, sampler.truth)
        distances = []
        for kind, limit in zip((CurveKind.WL, CurveKind.SW), limits):
            estimated = as_threshold_curve(season.analysis.ranked, kind)
            distances.append(roc_distance(estimated, as_threshold_curve(true_ranked, kind), metric))
            distances.append(roc_distance(estimated, limit, metric))
        out.append((season, tuple(distances)))
    return out


async def run_convergence(
    mu: npt.ArrayLike,
    design: npt.ArrayLike,
    scales: Sequence[int],
    metric: Optional[MetricConfig] = None,
    reps: int = 200,
    seed: int = SimulationConfig.seed,
    link: LinkFunction = LOGISTIC,
    workers: int = 1,
    fit_config: Optional[FitConfig] = None,
    teams: Optional[Sequence[str]] = None,
    bus: Optional[EventBus] = None,
) -> SimulationResult:
    """Mean distances of estimated curves to the true and limiting curves as the schedule grows.

    Every grid point multiplies the base ``design`` counts by its scale, so the design
    ratios stay fixed while all nonzero pair counts grow together.
    """
    metric = metric or MetricConfig()
    fit_config = fit_config or FitConfig()
    bus = bus or EventBus()
    mu = np.asarray(mu, dtype=np.float64)
    base = schedule(len(mu), design)
    if reps < 1 or not scales or min(scales) < 1:
        raise ConfigError("convergence needs reps >= 1 and positive scales")

    samplers = {scale: SeasonSampler.build(mu, scale * base, link, teams) for scale in scales}
    reference = samplers[scales[0]].model
    limits = (as_threshold_curve(reference, CurveKind.WL), as_threshold_curve(reference, CurveKind.SW))
    keys = [(scale, start, stop) for scale in scales for start, stop in _blocks(reps)]
    jobs = [
        partial(_convergence_block, samplers[scale], limits, metric, seed, scale, start, stop, fit_config)
        for scale, start, stop in keys
    ]
    outputs = await _run_jobs(jobs, workers)

    by_scale: Dict[int, list] = {scale: [] for scale in scales}
    for (scale, _, _), block in zip(keys, outputs):
        by_scale[scale].extend(block)

    rows = []
    total_resamples = 0
    for scale in scales:
        block = by_scale[scale]
        seasons = [season for season, _ in block]
        distances = np.array([d for _, d in block])
        resamples = await _report(bus, "metricsim.convergence", "scale", scale, seasons)
        total_resamples += resamples
        row: Dict[str, Any] = {"scale": scale, "N": int(samplers[scale].model.N)}
        row.update({name: float(value) for name, value in zip(DISTANCE_COLUMNS, distances.mean(axis=0))})
        row["resamples"] = resamples
        rows.append(row)
    return SimulationResult(
        table=pd.DataFrame(rows),
        resamples=total_resamples,
        events=serialize_events(bus.recent()),
    )


def convergence_experiment(
    mu: npt.ArrayLike,
    design: npt.ArrayLike,
    scales: Sequence[int],
    metric: Optional[MetricConfig] = None,
    reps: int = 200,
    seed: int = SimulationConfig.seed,
    **kwargs: Any,
) -> SimulationResult:
    return asyncio.run(run_convergence(mu, design, scales, metric, reps, seed, **kwargs))


def trend_test(table: pd.DataFrame, column: str, by: str = "N") -> Tuple[float, float]:
    """Spearman correlation of ``column`` against ``by`` with its two-sided p-value."""
    result = stats.spearmanr(table[by], table[column])
    return float(result[0]), float(result[1])


def loglog_slopes(
    table: pd.DataFrame, columns: Sequence[str] = SE_COLUMNS, by: str = "n"
) -> Dict[str, float]:
    x = np.log(table[by].to_numpy(dtype=np.float64))
    return {
        column: float(stats.linregress(x, np.log(table[column].to_numpy(dtype=np.float64))).slope)
        for column in columns
    }
