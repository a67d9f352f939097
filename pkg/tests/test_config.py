from pathlib import Path

import pytest

from pcroc.config import FitConfig, SimulationConfig, StoreConfig, parse_grid
from pcroc.errors import EXIT_INPUT, ConfigError, GameLogError


def test_parse_grid_forms():
    assert parse_grid("5:50:5") == tuple(range(5, 55, 5))
    assert parse_grid("1:3") == (1, 2, 3)
    assert parse_grid("2, 8,32") == (2, 8, 32)


@pytest.mark.parametrize("text", ["", "a,b", "5:1", "1:9:0"])
def test_parse_grid_rejects(text):
    with pytest.raises(ConfigError):
        parse_grid(text)


def test_simulation_defaults():
    config = SimulationConfig()
    assert config.teams == 10
    assert config.n_grid == (5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
    assert config.reps == 2000


@pytest.mark.parametrize(
    "kwargs", [{"teams": 1}, {"reps": 0}, {"workers": 0}, {"n_grid": ()}, {"n_grid": (0, 5)}]
)
def test_simulation_validation(kwargs):
    with pytest.raises(ConfigError):
        SimulationConfig(**kwargs)


def test_fit_validation():
    with pytest.raises(ConfigError):
        FitConfig(tolerance=0)
    with pytest.raises(ConfigError):
        FitConfig(max_iterations=0)


def test_from_env(monkeypatch):
    monkeypatch.setenv("PCROC_REPS", "300")
    monkeypatch.setenv("PCROC_SEED", "7")
    monkeypatch.setenv("PCROC_TOLERANCE", "1e-8")
    monkeypatch.setenv("PCROC_RESULTS_DIR", "/tmp/pcroc-out")
    monkeypatch.delenv("REDIS_URL", raising=False)
    config = SimulationConfig.from_env()
    assert (config.reps, config.seed) == (300, 7)
    assert config.fit.tolerance == 1e-8
    store = StoreConfig.from_env()
    assert store.results_dir == Path("/tmp/pcroc-out")
    assert store.redis_url is None


def test_bad_env_value(monkeypatch):
    monkeypatch.setenv("PCROC_WORKERS", "many")
    with pytest.raises(ConfigError, match="PCROC_WORKERS"):
        SimulationConfig.from_env()


def test_game_log_error_carries_line():
    error = GameLogError("team plays itself", line=4)
    assert str(error) == "line 4: team plays itself"
    assert error.exit_code == EXIT_INPUT
    assert isinstance(error, ValueError)
