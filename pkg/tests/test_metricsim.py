import math

import numpy as np
import pandas as pd
import pytest

from pcroc.bus import EventBus
from pcroc.config import MetricConfig, SimulationConfig
from pcroc.data import PairCounts
from pcroc.errors import ConfigError
from pcroc.fit import fit_mle, predict_probs, strengths_from_true
from pcroc.inference import TrueModel
from pcroc.metricsim import (
    SE_COLUMNS,
    SeasonSampler,
    ThresholdCurve,
    as_threshold_curve,
    convergence_experiment,
    loglog_slopes,
    replication_rng,
    roc_distance,
    simulate_se_decay,
    simulate_season,
    simulate_true_c_stats,
    trend_test,
)
from pcroc.roc import CurveKind, auc, rank_pairs, wl_curve

from conftest import random_counts


def _single_pair(q: float):
    counts = PairCounts.from_wins(("A", "B"), [[0, 7], [3, 0]])
    estimates = strengths_from_true([math.log(q / (1 - q)), 0.0], counts.teams)
    return rank_pairs(counts, predict_probs(estimates), estimates)


def _constant(value):
    # value on [0, 1), (0, 0) from 1 on
    return ThresholdCurve(CurveKind.WL, np.array([1.0]), np.array([value, [0.0, 0.0]]))


class TestThresholdCurve:
    def test_single_pair_steps(self):
        curve = as_threshold_curve(_single_pair(0.73), CurveKind.WL)
        np.testing.assert_allclose(curve(0.1), [1, 1])
        np.testing.assert_allclose(curve(0.28), [0.3, 0.7])
        np.testing.assert_allclose(curve(0.5), [0.3, 0.7])
        np.testing.assert_allclose(curve(0.74), [0, 0])
        np.testing.assert_allclose(curve(1.0), [0, 0])

    def test_breakpoint_belongs_to_upper_interval(self):
        curve = ThresholdCurve(CurveKind.SW, np.array([0.5, 0.8]), np.array([[1, 1], [0.4, 0.9], [0, 0]]))
        np.testing.assert_allclose(curve(0.4999), [1, 1])
        np.testing.assert_allclose(curve(0.5), [0.4, 0.9])
        np.testing.assert_allclose(curve(0.8), [0, 0])

    def test_knots_match_curve(self, rng):
        for _ in range(20):
            counts = random_counts(rng, int(rng.integers(3, 9)))
            estimates = fit_mle(counts)
            ranked = rank_pairs(counts, predict_probs(estimates), estimates)
            threshold = as_threshold_curve(ranked, "wl")
            np.testing.assert_array_equal(threshold.knots(), wl_curve(ranked).knots)
            assert threshold.area() == pytest.approx(auc(wl_curve(ranked)), abs=1e-10)

    def test_nonincreasing(self, rng):
        counts = random_counts(rng, 6)
        estimates = fit_mle(counts)
        curve = as_threshold_curve(rank_pairs(counts, predict_probs(estimates), estimates), "wl")
        assert np.all(np.diff(curve.values, axis=0) <= 0)

    def test_limiting_source(self):
        curve = as_threshold_curve(TrueModel.uniform([0.8], 1), CurveKind.SW)
        np.testing.assert_allclose(curve(0.0), [1, 1])
        np.testing.assert_allclose(curve(0.9), [0, 0])


class TestRocDistance:
    def test_identity(self):
        curve = as_threshold_curve(_single_pair(0.73))
        assert roc_distance(curve, curve) == 0.0

    def test_constant_extremes(self):
        top = _constant([1.0, 1.0])
        bottom = ThresholdCurve(CurveKind.WL, np.array([0.0]), np.array([[1.0, 1.0], [0.0, 0.0]]))
        cfg = MetricConfig(rho="euclidean", z=1)
        assert roc_distance(top, bottom, cfg) == pytest.approx(math.sqrt(2))

    def test_two_single_pair_curves(self):
        f = as_threshold_curve(_single_pair(0.73))
        g = as_threshold_curve(_single_pair(0.75))
        # the curves differ on [0.25, 0.27) and on [0.73, 0.75), each by a (0.3, 0.7) step
        for z in (1.0, 2.0, 3.0):
            expected = (2 * 0.02 * 0.58 ** (z / 2)) ** (1 / z)
            assert roc_distance(f, g, MetricConfig(z=z)) == pytest.approx(expected, rel=1e-9)
        manhattan = roc_distance(f, g, MetricConfig(rho="manhattan", z=1))
        assert manhattan == pytest.approx(2 * 0.02 * 1.0, rel=1e-9)

    def test_metric_axioms(self, rng):
        curves = []
        for _ in range(3):
            counts = random_counts(rng, 5)
            estimates = fit_mle(counts)
            curves.append(as_threshold_curve(rank_pairs(counts, predict_probs(estimates), estimates)))
        for rho in ("euclidean", "manhattan", "chebyshev"):
            cfg = MetricConfig(rho=rho, z=2)
            a, b, c = curves
            assert roc_distance(a, b, cfg) == roc_distance(b, a, cfg)
            assert roc_distance(a, c, cfg) <= roc_distance(a, b, cfg) + roc_distance(b, c, cfg) + 1e-12

    def test_metric_config_validation(self):
        with pytest.raises(ConfigError):
            MetricConfig(z=0.5)
        with pytest.raises(ConfigError):
            MetricConfig(rho="cosine")


class TestSampling:
    def test_replication_streams_are_keyed(self):
        a = replication_rng(5, 1, 10, 3).integers(0, 1 << 30, size=4)
        b = replication_rng(5, 1, 10, 3).integers(0, 1 << 30, size=4)
        c = replication_rng(5, 1, 10, 4).integers(0, 1 << 30, size=4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_simulate_season_schedule(self):
        counts = simulate_season([1.0, 0.0, -1.0], 6, rng=np.random.default_rng(1))
        np.testing.assert_array_equal(counts.n, [[0, 6, 6], [6, 0, 6], [6, 6, 0]])
        assert counts.N == 18

    def test_sampler_aligns_wins_with_q(self):
        sampler = SeasonSampler.build([0.5, 0.0, -0.5, 1.0], 5)
        counts, w_q = sampler.draw(np.random.default_rng(2))
        ranked = rank_pairs(counts, sampler.probs, sampler.truth)
        np.testing.assert_allclose(ranked.q_sorted, sampler.model.q)
        np.testing.assert_array_equal(ranked.w_q, w_q)

    def test_true_c_stats_draws(self):
        model = TrueModel.uniform([0.5, 0.7, 0.9], 10)
        c_wl, c_sw = simulate_true_c_stats(model, 500, seed=11)
        assert c_wl.shape == (500,)
        again, _ = simulate_true_c_stats(model, 500, seed=11)
        np.testing.assert_array_equal(c_wl, again)
        assert np.all((c_wl >= 0) & (c_wl <= 1))
        assert np.nanmean(c_sw) > 0.5


class TestSeDecay:
    def _config(self, workers=1):
        return SimulationConfig(teams=4, n_grid=(5, 10), reps=100, seed=3, workers=workers)

    def test_table_shape(self):
        bus = EventBus()
        result = simulate_se_decay(self._config(), bus=bus)
        assert list(result.table["n"]) == [5, 10]
        for column in SE_COLUMNS:
            assert np.all(result.table[column] > 0)
        assert bus.count("progress") == 2
        assert result.resamples == _resample_count(bus)

    def test_reproducible_across_workers(self):
        one = simulate_se_decay(self._config(workers=1)).table
        three = simulate_se_decay(self._config(workers=3)).table
        pd.testing.assert_frame_equal(one, three)

    def test_requires_enough_replications(self):
        with pytest.raises(ConfigError):
            simulate_se_decay(SimulationConfig(teams=4, n_grid=(5,), reps=10))

    def test_equal_strengths_match_closed_form(self):
        config = SimulationConfig(teams=4, n_grid=(20,), reps=400, seed=9)
        table = simulate_se_decay(config, mu=np.zeros(4)).table
        row = table.iloc[0]
        # a sample SD over 400 draws is within about 3 * sd / sqrt(798) of the truth
        assert row["se_c_wl_true_emp"] == pytest.approx(row["se_c_wl_exact"], rel=3 / math.sqrt(798))

    def test_loglog_slopes(self):
        table = pd.DataFrame({"n": [4, 16, 64], "se": [0.5, 0.25, 0.125]})
        assert loglog_slopes(table, ["se"]) == pytest.approx({"se": -0.5})


def _resample_count(bus: EventBus) -> int:
    return sum(event.payload["count"] for event in bus.recent(500) if event.topic == "resample")


class TestConvergence:
    def test_distances_shrink(self):
        design = np.ones((4, 4), dtype=int) - np.eye(4, dtype=int)
        result = convergence_experiment(
            [0.8, 0.2, -0.3, -0.7], design, scales=(1, 4, 16, 64), reps=60, seed=4
        )
        table = result.table
        assert list(table["N"]) == [6, 24, 96, 384]
        for column in ("wl_to_limit", "sw_to_limit"):
            assert table[column].iloc[-1] < table[column].iloc[0]
            rho, _ = trend_test(table, column)
            assert rho < 0

    def test_single_pair_limit(self):
        design = np.array([[0, 1], [1, 0]])
        result = convergence_experiment([0.5, -0.5], design, scales=(2, 8), reps=5, seed=1)
        assert len(result.table) == 2
        assert result.events


@pytest.mark.slow
class TestSimulationAcceptance:
    def test_se_decay_rates(self):
        config = SimulationConfig(reps=2000)
        result = simulate_se_decay(config)
        for column, slope in loglog_slopes(result.table).items():
            assert -0.6 <= slope <= -0.4, column

    def test_taylor_agrees_with_simulation(self):
        config = SimulationConfig(n_grid=(20, 30, 40, 50), reps=2000)
        table = simulate_se_decay(config).table
        for _, row in table.iterrows():
            assert row["se_c_sw_taylor"] == pytest.approx(row["se_c_sw_true_emp"], rel=0.15)

    def test_convergence_trend(self):
        m = 6
        design = np.ones((m, m), dtype=int) - np.eye(m, dtype=int)
        result = convergence_experiment(
            np.linspace(-1, 1, m), design, scales=(1, 2, 4, 8, 16, 32, 64, 128), reps=200, seed=8
        )
        for column in ("wl_to_limit", "sw_to_limit"):
            rho, p = trend_test(result.table, column)
            assert rho < 0 and p < 0.01
