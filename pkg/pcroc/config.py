from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple

from .errors import ConfigError

RHO_CHOICES = ("euclidean", "manhattan", "chebyshev")
DEFAULT_N_GRID = tuple(range(5, 55, 5))


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{name}={raw!r} is not a number") from None


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name}={raw!r} is not an integer") from None


@dataclass(frozen=True)
class FitConfig:
    tolerance: float = 1e-10
    max_iterations: int = 10000

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")

    @classmethod
    def from_env(cls) -> "FitConfig":
        return cls(
            tolerance=_env_float("PCROC_TOLERANCE", cls.tolerance),
            max_iterations=_env_int("PCROC_MAX_ITER", cls.max_iterations),
        )


@dataclass(frozen=True)
class MetricConfig:
    rho: str = "euclidean"
    z: float = 2.0

    def __post_init__(self) -> None:
        if self.rho not in RHO_CHOICES:
            raise ConfigError(f"rho must be one of {RHO_CHOICES}, got {self.rho!r}")
        if not self.z >= 1:
            raise ConfigError(f"z must be >= 1, got {self.z}")


@dataclass(frozen=True)
class SimulationConfig:
    teams: int = 10
    n_grid: Tuple[int, ...] = DEFAULT_N_GRID
    reps: int = 2000
    seed: int = 20190101
    workers: int = 1
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self) -> None:
        if self.teams < 2:
            raise ConfigError(f"need at least 2 teams, got {self.teams}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not self.n_grid or min(self.n_grid) < 1:
            raise ConfigError(f"n_grid must hold positive counts, got {self.n_grid}")

    @classmethod
    def from_env(cls) -> "SimulationConfig":
        return cls(
            reps=_env_int("PCROC_REPS", cls.reps),
            seed=_env_int("PCROC_SEED", cls.seed),
            workers=_env_int("PCROC_WORKERS", cls.workers),
            fit=FitConfig.from_env(),
        )


@dataclass(frozen=True)
class StoreConfig:
    results_dir: Path = Path("results")
    redis_url: str | None = None

    @classmethod
    def from_env(cls) -> "StoreConfig":
        return cls(
            results_dir=Path(os.getenv("PCROC_RESULTS_DIR", "results")),
            redis_url=os.getenv("REDIS_URL") or None,
        )


def parse_grid(text: str) -> Tuple[int, ...]:
    """Parse ``start:stop:step`` (stop inclusive) or a comma separated list."""
    try:
        if ":" in text:
            parts = [int(part) for part in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            start, stop, step = parts
            if step < 1:
                raise ValueError
            grid = tuple(range(start, stop + 1, step))
        else:
            grid = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None
    if not grid:
        raise ConfigError(f"grid {text!r} is empty")
    return grid
