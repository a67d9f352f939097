import math

import numpy as np
import pytest
from scipy import optimize

from pcroc.config import FitConfig
from pcroc.data import PairCounts
from pcroc.errors import ConfigError, ConnectivityError
from pcroc.fit import (
    LOGISTIC,
    PROBIT,
    fit_mle,
    get_link,
    log_likelihood,
    mm_step,
    predict_probs,
    strengths_from_true,
)

from conftest import random_counts


def _two_teams(w: int, n: int) -> PairCounts:
    return PairCounts.from_wins(("A", "B"), [[0, w], [n - w, 0]])


class TestLinks:
    def test_lookup(self):
        assert get_link("logistic") is LOGISTIC
        assert get_link("probit") is PROBIT

    def test_unknown_link(self):
        with pytest.raises(ConfigError):
            get_link("cauchy")

    @pytest.mark.parametrize("link", [LOGISTIC, PROBIT])
    def test_symmetry(self, link):
        x = np.linspace(-8, 8, 161)
        np.testing.assert_allclose(link.forward(x) + link.forward(-x), 1.0, atol=1e-15)

    @pytest.mark.parametrize("link", [LOGISTIC, PROBIT])
    def test_score_is_derivative_of_log_cdf(self, link):
        x = np.linspace(-6, 6, 49)
        h = 1e-6
        numeric = (link.log_forward(x + h) - link.log_forward(x - h)) / (2 * h)
        np.testing.assert_allclose(link.score(x), numeric, rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize("link", [LOGISTIC, PROBIT])
    def test_curvature_is_second_derivative(self, link):
        x = np.linspace(-6, 6, 49)
        h = 1e-5
        numeric = (link.score(x + h) - link.score(x - h)) / (2 * h)
        np.testing.assert_allclose(link.curvature(x), numeric, rtol=1e-5, atol=1e-9)


class TestFitMle:
    def test_two_team_closed_form(self):
        estimates = fit_mle(_two_teams(3, 4))
        assert estimates.converged
        assert estimates.mu_hat[0] - estimates.mu_hat[1] == pytest.approx(math.log(3), abs=1e-8)

    def test_two_team_grid(self):
        for n in range(2, 51):
            for w in range(1, n):
                estimates = fit_mle(_two_teams(w, n))
                diff = estimates.mu_hat[0] - estimates.mu_hat[1]
                assert diff == pytest.approx(math.log(w / (n - w)), abs=1e-8)

    def test_probit_two_team_closed_form(self):
        estimates = fit_mle(_two_teams(3, 4), PROBIT)
        diff = estimates.mu_hat[0] - estimates.mu_hat[1]
        assert PROBIT.forward(diff) == pytest.approx(0.75, abs=1e-8)

    def test_cycle_gives_equal_strengths(self):
        w = [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
        estimates = fit_mle(PairCounts.from_wins(("A", "B", "C"), w))
        np.testing.assert_allclose(estimates.mu_hat, 0.0, atol=1e-10)
        np.testing.assert_allclose(predict_probs(estimates).p_hat[~np.eye(3, dtype=bool)], 0.5)

    def test_sum_zero_constraint(self, rng):
        estimates = fit_mle(random_counts(rng, 6))
        assert abs(estimates.mu_hat.sum()) < 1e-10

    @pytest.mark.parametrize("link", [LOGISTIC, PROBIT])
    def test_matches_generic_optimizer(self, rng, link):
        m = 4
        teams = [f"t{i}" for i in range(m)]
        while True:
            w = np.triu(rng.binomial(10, rng.uniform(0.2, 0.8, size=(m, m))), 1)
            w = w + np.triu(10 - w, 1).T
            counts = PairCounts.from_wins(teams, w)
            try:
                estimates = fit_mle(counts, link)
                break
            except ConnectivityError:
                continue

        def negative(free):
            mu = np.append(free, -free.sum())
            return -log_likelihood(mu, counts, link)

        def gradient(free):
            # the last strength is minus the sum of the free ones
            mu = np.append(free, -free.sum())
            terms = counts.w * link.score(mu[:, None] - mu[None, :])
            full = terms.sum(axis=1) - terms.sum(axis=0)
            return -(full[:-1] - full[-1])

        best = optimize.minimize(
            negative, np.zeros(m - 1), jac=gradient, method="BFGS", options={"gtol": 1e-12}
        )
        reference = np.append(best.x, -best.x.sum())
        np.testing.assert_allclose(estimates.mu_hat, reference, atol=1e-6)

    @pytest.mark.parametrize("link", [LOGISTIC, PROBIT])
    def test_team_order_does_not_matter(self, rng, link):
        for _ in range(10):
            counts = random_counts(rng, 6)
            order = rng.permutation(counts.m)
            shuffled = PairCounts(
                teams=tuple(counts.teams[i] for i in order),
                n=counts.n[np.ix_(order, order)],
                w=counts.w[np.ix_(order, order)],
            )
            np.testing.assert_allclose(
                fit_mle(shuffled, link).mu_hat, fit_mle(counts, link).mu_hat[order], atol=1e-7
            )

    def test_refuses_disconnected(self):
        with pytest.raises(ConnectivityError) as info:
            fit_mle(_two_teams(2, 2))
        assert info.value.result.witness == (("A",), ("B",))

    def test_non_convergence_is_flagged(self, rng):
        counts = random_counts(rng, 6)
        estimates = fit_mle(counts, config=FitConfig(tolerance=1e-14, max_iterations=2))
        assert not estimates.converged
        assert estimates.iterations == 2

    def test_mm_step_increases_likelihood(self, rng):
        counts = random_counts(rng, 7)
        mu = np.zeros(counts.m)
        previous = log_likelihood(mu, counts, LOGISTIC)
        for _ in range(25):
            mu = mm_step(mu, counts)
            current = log_likelihood(mu, counts, LOGISTIC)
            assert current >= previous - 1e-12
            previous = current

    def test_ranking_orders_by_strength(self):
        estimates = strengths_from_true([0.5, -1.0, 2.0], ("a", "b", "c"))
        assert [team for team, _ in estimates.ranking()] == ["c", "a", "b"]


class TestPredictProbs:
    def test_equal_strengths(self):
        probs = predict_probs(strengths_from_true([0.0, 0.0], ("A", "B")))
        assert probs.p_hat[0, 1] == 0.5

    def test_logistic_value(self):
        probs = predict_probs(strengths_from_true([math.log(3), 0.0], ("A", "B")))
        assert probs.p_hat[0, 1] == pytest.approx(0.75, abs=1e-12)
        assert probs.p_hat[1, 0] == pytest.approx(0.25, abs=1e-12)

    def test_probit_value(self):
        probs = predict_probs(strengths_from_true([1.0, 0.0], ("A", "B"), PROBIT), PROBIT)
        expected = 0.5 * (1 + math.erf(1 / math.sqrt(2)))
        assert probs.p_hat[0, 1] == pytest.approx(expected, abs=1e-12)
        assert probs.p_hat[0, 1] == pytest.approx(0.841345, abs=1e-6)

    def test_complementary(self, rng):
        mu = rng.normal(size=8)
        p = predict_probs(strengths_from_true(mu, [str(i) for i in range(8)])).p_hat
        off = ~np.eye(8, dtype=bool)
        np.testing.assert_allclose((p + p.T)[off], 1.0, atol=1e-15)
        np.testing.assert_array_equal(np.diag(p), 0.5)

    def test_translation_invariant(self, rng):
        mu = rng.normal(size=5)
        teams = [str(i) for i in range(5)]
        a = predict_probs(strengths_from_true(mu, teams)).p_hat
        b = predict_probs(strengths_from_true(mu + 3.0, teams)).p_hat
        np.testing.assert_allclose(a, b, atol=1e-14)
