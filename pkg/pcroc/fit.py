from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy import special

from .config import FitConfig
from .data import PairCounts, check_connectivity
from .errors import ConfigError, ConnectivityError

logger = logging.getLogger(__name__)

LOG_FLOOR = np.log(1e-300)

Array = npt.NDArray[np.float64]


class LinkKind(str, Enum):
    LOGISTIC = "logistic"
    PROBIT = "probit"


@dataclass(frozen=True)
class LinkFunction:
    """Symmetric CDF ``F`` with ``p_ij = F(mu_i - mu_j)``."""

    kind: LinkKind
    forward: Callable[[Array], Array]
    inverse: Callable[[Array], Array]
    log_forward: Callable[[Array], Array]
    # first and second derivatives of log F
    score: Callable[[Array], Array]
    curvature: Callable[[Array], Array]


def _probit_score(x: Array) -> Array:
    return np.exp(-0.5 * np.square(x) - 0.5 * np.log(2 * np.pi) - special.log_ndtr(x))


def _probit_curvature(x: Array) -> Array:
    mills = _probit_score(x)
    return -mills * (x + mills)


LOGISTIC = LinkFunction(
    kind=LinkKind.LOGISTIC,
    forward=special.expit,
    inverse=special.logit,
    log_forward=special.log_expit,
    score=lambda x: special.expit(-x),
    curvature=lambda x: -special.expit(x) * special.expit(-x),
)

PROBIT = LinkFunction(
    kind=LinkKind.PROBIT,
    forward=special.ndtr,
    inverse=special.ndtri,
    log_forward=special.log_ndtr,
    score=_probit_score,
    curvature=_probit_curvature,
)

_LINKS = {LinkKind.LOGISTIC: LOGISTIC, LinkKind.PROBIT: PROBIT}


def get_link(kind: str | LinkKind) -> LinkFunction:
    try:
        return _LINKS[LinkKind(kind)]
    except ValueError:
        raise ConfigError(f"unknown link {kind!r}; use logistic or probit") from None


@dataclass(frozen=True)
class StrengthEstimates:
    teams: Tuple[str, ...]
    mu_hat: Array
    link: LinkKind
    log_likelihood: float
    iterations: int
    converged: bool
    constraint: str = "sum_zero"

    def __post_init__(self) -> None:
        mu = np.array(self.mu_hat, dtype=np.float64)
        mu.setflags(write=False)
        object.__setattr__(self, "mu_hat", mu)

    def ranking(self) -> list[tuple[str, float]]:
        order = np.argsort(-self.mu_hat, kind="stable")
        return [(self.teams[i], float(self.mu_hat[i])) for i in order]


@dataclass(frozen=True)
class ProbMatrix:
    p_hat: Array

    def __post_init__(self) -> None:
        self.p_hat.setflags(write=False)

    @property
    def q_hat(self) -> Array:
        return np.maximum(self.p_hat, 1.0 - self.p_hat)


def _center(mu: Array) -> Array:
    return mu - mu.mean()


def log_likelihood(mu: Array, counts: PairCounts, link: LinkFunction) -> float:
    diff = mu[:, None] - mu[None, :]
    played = counts.w > 0
    logs = np.maximum(link.log_forward(diff[played]), LOG_FLOOR)
    return float(np.dot(counts.w[played], logs))


def mm_step(mu: Array, counts: PairCounts) -> Array:
    """One MM update for the logistic link, then recentered to sum zero.

    ``gamma_i <- W_i / sum_j n_ij / (gamma_i + gamma_j)`` written on the log scale as
    ``mu_i <- mu_i + log(W_i / E_i)`` with ``E_i`` the expected wins of team i.
    """
    diff = mu[:, None] - mu[None, :]
    expected = (counts.n * special.expit(diff)).sum(axis=1)
    wins = counts.w.sum(axis=1)
    return _center(mu + np.log(wins) - np.log(expected))


def _newton_direction(mu: Array, counts: PairCounts, link: LinkFunction) -> Array:
    diff = mu[:, None] - mu[None, :]
    grad_terms = counts.w * link.score(diff)
    gradient = grad_terms.sum(axis=1) - grad_terms.sum(axis=0)
    curv = counts.w * link.curvature(diff)
    curv = curv + curv.T
    neg_hessian = -(np.diag(curv.sum(axis=1)) - curv)
    m = len(mu)
    # the all-ones direction is the null space removed by the sum-zero constraint
    return np.linalg.solve(neg_hessian + np.ones((m, m)) / m, gradient)


def _fit_mm(counts: PairCounts, config: FitConfig) -> Tuple[Array, int, bool]:
    mu = np.zeros(counts.m)
    for iteration in range(1, config.max_iterations + 1):
        updated = mm_step(mu, counts)
        change = np.max(np.abs(updated - mu))
        mu = updated
        if change < config.tolerance:
            return mu, iteration, True
    return mu, config.max_iterations, False


def _fit_newton(counts: PairCounts, link: LinkFunction, config: FitConfig) -> Tuple[Array, int, bool]:
    mu = np.zeros(counts.m)
    current = log_likelihood(mu, counts, link)
    for iteration in range(1, config.max_iterations + 1):
        direction = _center(_newton_direction(mu, counts, link))
        step = 1.0
        for _ in range(60):
            candidate = _center(mu + step * direction)
            value = log_likelihood(candidate, counts, link)
            if value >= current - 1e-12 * abs(current):
                break
            step *= 0.5
        change = np.max(np.abs(candidate - mu))
        mu, current = candidate, value
        if change < config.tolerance:
            return mu, iteration, True
    return mu, config.max_iterations, False


def fit_mle(
    counts: PairCounts,
    link: LinkFunction = LOGISTIC,
    config: Optional[FitConfig] = None,
) -> StrengthEstimates:
    """Maximum likelihood strengths under ``sum(mu) = 0``.

    Raises ConnectivityError when Ford's condition fails. Running out of iterations is
    reported through ``converged=False`` rather than raised.
    """
    config = config or FitConfig()
    connectivity = check_connectivity(counts)
    if not connectivity.ok:
        raise ConnectivityError(connectivity)

    if link.kind is LinkKind.LOGISTIC:
        mu, iterations, converged = _fit_mm(counts, config)
    else:
        mu, iterations, converged = _fit_newton(counts, link, config)

    if not converged:
        logger.warning(
            "%s fit stopped after %d iterations without reaching tolerance %g",
            link.kind.value, iterations, config.tolerance,
        )
    else:
        logger.debug("%s fit converged in %d iterations", link.kind.value, iterations)
    return StrengthEstimates(
        teams=counts.teams,
        mu_hat=mu,
        link=link.kind,
        log_likelihood=log_likelihood(mu, counts, link),
        iterations=iterations,
        converged=converged,
    )


def strengths_from_true(
    mu: npt.ArrayLike,
    teams: Sequence[str],
    link: LinkFunction = LOGISTIC,
    counts: Optional[PairCounts] = None,
) -> StrengthEstimates:
    """Wrap known strengths so the ROC machinery can build true curves from them."""
    centered = _center(np.asarray(mu, dtype=np.float64))
    value = log_likelihood(centered, counts, link) if counts is not None else float("nan")
    return StrengthEstimates(
        teams=tuple(teams),
        mu_hat=centered,
        link=link.kind,
        log_likelihood=value,
        iterations=0,
        converged=True,
    )


def predict_probs(estimates: StrengthEstimates, link: Optional[LinkFunction] = None) -> ProbMatrix:
    link = link or get_link(estimates.link)
    mu = estimates.mu_hat
    m = len(mu)
    rows, cols = np.triu_indices(m, 1)
    diff = mu[rows] - mu[cols]
    # one evaluation per pair on the stronger side; the weaker side is its complement
    q = link.forward(np.abs(diff))
    first_stronger = diff >= 0
    p_hat = np.full((m, m), 0.5)
    p_hat[rows, cols] = np.where(first_stronger, q, 1.0 - q)
    p_hat[cols, rows] = np.where(first_stronger, 1.0 - q, q)
    return ProbMatrix(p_hat=p_hat)
